from django.db import models
from django.core.validators import MinValueValidator


class ExperimentRun(models.Model):
    """One execution (or cache hit) of an experiment command"""

    STATUS_CHOICES = [
        ('COMPLETED', 'Completed'),
        ('CACHED', 'Served from cache'),
        ('FAILED', 'Failed'),
    ]

    COMMAND_CHOICES = [
        ('classify', 'Classify'),
        ('survival', 'Survival curve'),
        ('asymptotics', 'Asymptotics'),
        ('envelope', 'Repulsion envelope'),
        ('sample_path', 'Sample path'),
        ('q_marginal', 'Q-marginal'),
    ]

    config_hash = models.CharField(max_length=64, db_index=True)
    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='COMPLETED')
    created_at = models.DateTimeField(auto_now_add=True)

    # Accounting
    wall_clock_seconds = models.FloatField(
        default=0.0,
        validators=[MinValueValidator(0)],
        help_text="Wall-clock time of the computation in seconds"
    )
    path_count = models.BigIntegerField(default=0, help_text="Simulated paths")
    seed = models.BigIntegerField(default=0)

    output_dir = models.CharField(max_length=1024, blank=True)
    config = models.JSONField(default=dict, blank=True)
    manifest = models.JSONField(default=dict, blank=True)
    error = models.TextField(blank=True)

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['command', 'config_hash']),
        ]

    def __str__(self):
        return f"{self.command} {self.config_hash[:12]} ({self.status})"
