# Generated by Django 5.2.7 on 2026-03-02 09:12

import django.core.validators
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('config_hash', models.CharField(db_index=True, max_length=64)),
                ('command', models.CharField(choices=[('classify', 'Classify'), ('survival', 'Survival curve'), ('asymptotics', 'Asymptotics'), ('envelope', 'Repulsion envelope'), ('sample_path', 'Sample path'), ('q_marginal', 'Q-marginal')], max_length=20)),
                ('status', models.CharField(choices=[('COMPLETED', 'Completed'), ('CACHED', 'Served from cache'), ('FAILED', 'Failed')], default='COMPLETED', max_length=20)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('wall_clock_seconds', models.FloatField(default=0.0, help_text='Wall-clock time of the computation in seconds', validators=[django.core.validators.MinValueValidator(0)])),
                ('path_count', models.BigIntegerField(default=0, help_text='Simulated paths')),
                ('seed', models.BigIntegerField(default=0)),
                ('output_dir', models.CharField(blank=True, max_length=1024)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('manifest', models.JSONField(blank=True, default=dict)),
                ('error', models.TextField(blank=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['command', 'config_hash'], name='experiments_command_5a1f0c_idx')],
            },
        ),
    ]
