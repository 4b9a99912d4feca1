"""
Django management command for the repulsion envelope criterion.
Run with: python manage.py envelope --config configs/envelope.ini
"""

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Evaluate J_w(h) and decide whether w lies in the repulsion envelope'
    experiment = 'envelope'
    title = 'REPULSION ENVELOPE'
