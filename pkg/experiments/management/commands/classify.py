"""
Django management command to classify a boundary as transient or recurrent.
Run with: python manage.py classify --config configs/classify.ini

Prints the verdict as JSON, e.g. {"classification": "Recurrent", ...}
"""

from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Classify the boundary (integral test and grid-verified growth conditions)'
    experiment = 'classify'
    title = 'BOUNDARY CLASSIFICATION'
