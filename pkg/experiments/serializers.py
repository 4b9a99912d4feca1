"""
Experiment config validation.

One DRF Serializer per config section; `validated_data` is the normalized
section that enters the canonical JSON and the config hash.
"""

import math

from rest_framework import serializers

from simulation.boundary import DEFAULT_CUTOFFS, BoundaryKind
from simulation.repulsion import WKind


class FloatListField(serializers.Field):
    """Comma-separated floats ('1, 2.5, 1e3') or a list of numbers"""

    default_error_messages = {
        'invalid': 'Expected a comma-separated list of numbers.',
        'empty': 'Expected at least one value.',
        'order': 'Values must be strictly increasing.',
    }

    def __init__(self, increasing=True, **kwargs):
        self.increasing = increasing
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if isinstance(data, str):
            items = [item.strip() for item in data.split(',') if item.strip()]
        elif isinstance(data, (list, tuple)):
            items = list(data)
        else:
            self.fail('invalid')
        try:
            values = [float(item) for item in items]
        except (TypeError, ValueError):
            self.fail('invalid')
        if not values:
            self.fail('empty')
        if not all(math.isfinite(v) for v in values):
            self.fail('invalid')
        if self.increasing and any(b <= a for a, b in zip(values, values[1:])):
            self.fail('order')
        return values

    def to_representation(self, value):
        return [float(v) for v in value]


class HorizonField(serializers.CharField):
    """Positive float or 'inf'"""

    def to_internal_value(self, data):
        text = super().to_internal_value(str(data)).strip().lower()
        if text in ('inf', 'infinity'):
            return 'inf'
        try:
            value = float(text)
        except ValueError:
            raise serializers.ValidationError("Expected a positive number or 'inf'.")
        if not value > 0 or not math.isfinite(value):
            raise serializers.ValidationError("Expected a positive number or 'inf'.")
        return value


class BoundarySerializer(serializers.Serializer):
    family = serializers.ChoiceField(choices=[k.value for k in BoundaryKind])
    parameter = serializers.FloatField(required=False, allow_null=True, default=None)
    f0 = serializers.FloatField(default=0.5, min_value=0.0, max_value=1.0)
    table = serializers.CharField(required=False, allow_blank=True, default='')
    tail_exponent = serializers.FloatField(default=0.25)
    horizon = serializers.FloatField(default=1e8, min_value=10.0)

    def validate(self, attrs):
        if attrs['family'] == BoundaryKind.TABULATED.value:
            if not attrs['table']:
                raise serializers.ValidationError({'table': 'tabulated boundaries need a CSV path'})
        elif attrs['parameter'] is None:
            raise serializers.ValidationError({'parameter': f"{attrs['family']} needs a parameter"})
        return attrs


class RunSerializer(serializers.Serializer):
    seed = serializers.IntegerField(min_value=0)
    workers = serializers.IntegerField(min_value=1, default=1)
    out = serializers.CharField()
    cache = serializers.BooleanField(default=True)


class ClassifySerializer(serializers.Serializer):
    cutoffs = FloatListField(default=list(DEFAULT_CUTOFFS))
    condition_horizon = serializers.FloatField(default=1e6, min_value=1e3)
    epsilon = serializers.FloatField(required=False, allow_null=True, default=None, min_value=0.0)

    def validate_cutoffs(self, value):
        if value[0] < 1.0:
            raise serializers.ValidationError('cutoffs must be ≥ 1')
        return value


class SurvivalSerializer(serializers.Serializer):
    t_grid = FloatListField(default=[1.0, 2.0, 5.0, 10.0])
    n_paths = serializers.IntegerField(min_value=1, default=100000)
    grid_points = serializers.IntegerField(min_value=16, default=512)
    rare_event_policy = serializers.BooleanField(default=True)
    refinement_levels = serializers.IntegerField(min_value=0, max_value=6, default=0)
    big_jump = serializers.BooleanField(default=False)

    def validate_t_grid(self, value):
        if value[0] <= 0:
            raise serializers.ValidationError('horizons must be positive')
        return value


class AsymptoticsSerializer(serializers.Serializer):
    t_grid = FloatListField(default=[2.0, 5.0, 10.0, 20.0])
    n_paths = serializers.IntegerField(min_value=1, default=100000)
    grid_points = serializers.IntegerField(min_value=16, default=512)
    t0 = serializers.FloatField(required=False, allow_null=True, default=None, min_value=1.0)
    residual = serializers.BooleanField(default=True)
    residual_nodes = serializers.IntegerField(min_value=8, default=64)

    def validate(self, attrs):
        t0 = attrs['t0']
        if t0 is not None and t0 > attrs['t_grid'][0]:
            raise serializers.ValidationError({'t0': 't0 must not exceed the first horizon'})
        return attrs


class EnvelopeSerializer(serializers.Serializer):
    w_kind = serializers.ChoiceField(choices=[k.value for k in WKind])
    w_parameter = serializers.FloatField()
    log_h_points = serializers.IntegerField(min_value=4, default=41)
    mc_check = serializers.BooleanField(default=False)
    mc_h = FloatListField(default=[2.0, 4.0])
    n_paths = serializers.IntegerField(min_value=1, default=100000)
    t_prelimit = serializers.FloatField(required=False, allow_null=True, default=None, min_value=0.0)


class SamplePathSerializer(serializers.Serializer):
    n_samples = serializers.IntegerField(min_value=1, default=4)
    clock_horizon = HorizonField(default='inf')
    curve_horizon = serializers.FloatField(default=8.0, min_value=0.0)
    curve_points = serializers.IntegerField(min_value=2, default=64)
    n_paths = serializers.IntegerField(min_value=1, default=100000)
    max_tail_fraction = serializers.FloatField(default=0.01, min_value=0.0, max_value=1.0)
    dt = serializers.FloatField(default=0.01, min_value=1e-6)
    tail_duration = serializers.FloatField(default=5.0, min_value=0.0)
    max_attempts = serializers.IntegerField(min_value=1, default=100000)
    dump_skeletons = serializers.BooleanField(default=False)

    def validate(self, attrs):
        horizon = attrs['clock_horizon']
        if horizon != 'inf' and horizon > attrs['curve_horizon']:
            raise serializers.ValidationError({'clock_horizon': 'must not exceed curve_horizon'})
        return attrs


class QMarginalSerializer(serializers.Serializer):
    h = serializers.FloatField(min_value=0.0)
    bins = serializers.IntegerField(min_value=2, default=24)
    y_edges = FloatListField(required=False, allow_null=True, default=None)
    n_paths = serializers.IntegerField(min_value=1, default=100000)
    t_prelimit = serializers.FloatField(required=False, allow_null=True, default=None, min_value=0.0)
    tv_tolerance = serializers.FloatField(default=0.02, min_value=0.0)
    max_doublings = serializers.IntegerField(min_value=0, default=3)
    dominant_y = FloatListField(required=False, allow_null=True, default=None)


COMMAND_SERIALIZERS = {
    'classify': ClassifySerializer,
    'survival': SurvivalSerializer,
    'asymptotics': AsymptoticsSerializer,
    'envelope': EnvelopeSerializer,
    'sample_path': SamplePathSerializer,
    'q_marginal': QMarginalSerializer,
}
