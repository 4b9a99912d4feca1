"""
Django management command comparing Monte Carlo φ(t) with the renewal ODE prediction.
Run with: python manage.py asymptotics --config configs/asymptotics.ini
"""

from ._base import ExperimentCommand, small_jump_note


class Command(ExperimentCommand):
    help = 'Compare φ̂(t) with 2KΦ̂(t)/sqrt(g(t)) and estimate the residual H(t). ' + small_jump_note()
    experiment = 'asymptotics'
    title = 'ASYMPTOTICS'
