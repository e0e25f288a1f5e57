import json
import math
from collections.abc import Mapping

import attrs
from rest_framework import serializers
from rest_framework.settings import api_settings

from .corpus import BUILTIN_NAMES, builtin_definition
from .exceptions import (
    EquilibriumError, EvaluationError, ExpressionError, LyapcertError,
    NotAnEquilibriumError, UnsupportedFeatureError, ZeroSolutionError,
)
from .expr import parse
from .hopfield import (
    HopfieldNetwork, compile_network, expression_activation, linear_activation, tanh_activation,
)
from .system_model import DUAL, build_system, finite_difference


# --- Loaded systems ---

@attrs.frozen(eq=False)
class LoadedSystem:
    """A validated system file: the SystemDef plus what the report echoes."""
    system: object
    kind: str
    network: object = None
    builtin: str | None = None
    overrides: dict = attrs.Factory(dict)


# --- Strict JSON fields ---

class NonFiniteLiteral:
    """Stands in for NaN/Infinity literals so fields can reject them with a path."""

    def __init__(self, text):
        self.text = text

    def __repr__(self):
        return self.text


def positive(value):
    if not value > 0:
        raise serializers.ValidationError('Must be positive.')


class FiniteFloatField(serializers.FloatField):
    """
    A JSON number that is finite. Booleans, strings and NaN/Infinity
    literals are rejected rather than coerced.
    """
    default_error_messages = {
        'non_finite': 'NaN and Infinity are not allowed.',
        'not_a_number': 'A number is required.',
    }

    def to_internal_value(self, data):
        if isinstance(data, NonFiniteLiteral):
            self.fail('non_finite')
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            self.fail('not_a_number')
        try:
            value = float(data)
        except OverflowError:
            self.fail('non_finite')
        if not math.isfinite(value):
            self.fail('non_finite')
        return super().to_internal_value(value)


class StrictIntegerField(serializers.IntegerField):

    def to_internal_value(self, data):
        if isinstance(data, bool) or not isinstance(data, int):
            self.fail('invalid')
        return super().to_internal_value(data)


class StrictCharField(serializers.CharField):

    def to_internal_value(self, data):
        if not isinstance(data, str):
            self.fail('invalid')
        return super().to_internal_value(data)


class BallRadiusField(serializers.Field):
    """A positive number, or the string "unbounded" (stored as math.inf)."""
    default_error_messages = {
        'invalid': 'Expected a positive number or "unbounded".',
    }

    def to_internal_value(self, data):
        if data == 'unbounded':
            return math.inf
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            self.fail('invalid')
        value = float(data)
        if not math.isfinite(value) or not value > 0:
            self.fail('invalid')
        return value

    def to_representation(self, value):
        return 'unbounded' if math.isinf(value) else float(value)


def float_vector(**kwargs):
    return serializers.ListField(child=FiniteFloatField(), **kwargs)


def float_matrix(**kwargs):
    return serializers.ListField(child=float_vector(), **kwargs)


class StrictSerializer(serializers.Serializer):
    """Rejects fields it does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)


# --- System files ---

class AnalysisOverridesSerializer(StrictSerializer):
    """
    Per-file overrides of the defaults table. Field names match
    AnalysisConfig; anything omitted keeps its default.
    """
    quad_tol = FiniteFloatField(required=False, validators=[positive])
    quad_max_depth = StrictIntegerField(required=False, min_value=1, max_value=60)
    margin = FiniteFloatField(required=False, min_value=0)
    horizon = FiniteFloatField(required=False, validators=[positive])
    seed = StrictIntegerField(required=False, min_value=0)
    polar_radii = StrictIntegerField(required=False, min_value=0)
    polar_directions = StrictIntegerField(required=False, min_value=0)
    halton_points = StrictIntegerField(required=False, min_value=0)
    halton_per_shell = StrictIntegerField(required=False, min_value=0)
    region_tol = FiniteFloatField(required=False, validators=[positive])
    dt = FiniteFloatField(required=False, validators=[positive])
    rtol = FiniteFloatField(required=False, validators=[positive])
    atol = FiniteFloatField(required=False, validators=[positive])
    t_end = FiniteFloatField(required=False, validators=[positive])
    blowup_norm = FiniteFloatField(required=False, validators=[positive])
    convergence_norm = FiniteFloatField(required=False, validators=[positive])
    simulation_count = StrictIntegerField(required=False, min_value=1)
    simulation_radius = FiniteFloatField(required=False, min_value=0)


class ExpressionSystemSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=['expressions'])
    n = StrictIntegerField(min_value=1)
    components = serializers.ListField(child=StrictCharField(), allow_empty=False)
    ball_radius = BallRadiusField(required=False, default=math.inf)
    jacobian = serializers.ChoiceField(choices=['dual', 'finite_difference'], required=False, default='dual')
    fd_step = FiniteFloatField(required=False, validators=[positive])
    equilibrium = float_vector(required=False)
    label = StrictCharField(required=False, allow_blank=True, default='')
    analysis = AnalysisOverridesSerializer(required=False)

    def validate(self, data):
        """
        Check that there is one component per dimension, that every component
        parses over x1..xn, and that the equilibrium has the right length.
        """
        n = data['n']
        errors = {}
        components = data['components']
        if len(components) != n:
            errors['components'] = [f'Expected {n} components, got {len(components)}.']
        else:
            component_errors = {}
            for index, source in enumerate(components):
                try:
                    parse(source, n)
                except ExpressionError as exc:
                    component_errors[index] = [str(exc)]
            if component_errors:
                errors['components'] = component_errors
        if 'equilibrium' in data and len(data['equilibrium']) != n:
            errors['equilibrium'] = [f'Expected {n} coordinates, got {len(data["equilibrium"])}.']
        if 'fd_step' in data and data['jacobian'] != 'finite_difference':
            errors['fd_step'] = ['Only meaningful with "jacobian": "finite_difference".']
        if errors:
            raise serializers.ValidationError(errors)
        return data

    def create(self, validated_data):
        mode = DUAL
        if validated_data['jacobian'] == 'finite_difference':
            mode = finite_difference(validated_data.get('fd_step'))
        try:
            system = build_system(
                validated_data['n'],
                validated_data['components'],
                ball_radius=validated_data['ball_radius'],
                jacobian_mode=mode,
                label=validated_data['label'] or self.context.get('label', ''),
                equilibrium=validated_data.get('equilibrium'),
            )
        except NotAnEquilibriumError as exc:
            raise serializers.ValidationError({'equilibrium': [str(exc)]})
        except (ZeroSolutionError, EvaluationError) as exc:
            raise serializers.ValidationError({'components': [str(exc)]})
        return LoadedSystem(
            system=system,
            kind='expressions',
            builtin=self.context.get('builtin'),
            overrides=dict(validated_data.get('analysis', {})),
        )


class ActivationSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=['tanh', 'linear', 'expression'])
    gain = FiniteFloatField(required=False, validators=[positive])
    slope = FiniteFloatField(required=False)
    expression = StrictCharField(required=False)

    def validate(self, data):
        kind = data['kind']
        allowed = {'tanh': 'gain', 'linear': 'slope', 'expression': 'expression'}[kind]
        errors = {
            key: [f'Not used by "{kind}" activations.']
            for key in ('gain', 'slope', 'expression') if key in data and key != allowed
        }
        if kind == 'expression':
            if 'expression' not in data:
                errors['expression'] = ['This field is required for "expression" activations.']
            else:
                try:
                    parse(data['expression'], 1)
                except ExpressionError as exc:
                    errors['expression'] = [str(exc)]
        if errors:
            raise serializers.ValidationError(errors)
        return data


def activation_from_data(data):
    if data['kind'] == 'tanh':
        return tanh_activation(data.get('gain', 1.0))
    if data['kind'] == 'linear':
        return linear_activation(data.get('slope', 1.0))
    return expression_activation(data['expression'])


class HopfieldSystemSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=['hopfield'])
    n = StrictIntegerField(min_value=1)
    a = serializers.ListField(child=FiniteFloatField(validators=[positive]))
    W = float_matrix()
    L = float_matrix(required=False)
    theta = float_vector(required=False)
    inputs = float_vector(required=False)
    activations = serializers.ListField(child=ActivationSerializer())
    x_star = float_vector(required=False)
    label = StrictCharField(required=False, allow_blank=True, default='')
    analysis = AnalysisOverridesSerializer(required=False)

    def validate(self, data):
        n = data['n']
        errors = {}
        for name in ('a', 'theta', 'inputs', 'x_star', 'activations'):
            if name in data and len(data[name]) != n:
                errors[name] = [f'Expected {n} entries, got {len(data[name])}.']
        for name in ('W', 'L'):
            if name not in data:
                continue
            matrix = data[name]
            if len(matrix) != n:
                errors[name] = [f'Expected {n} rows, got {len(matrix)}.']
                continue
            row_errors = {
                index: [f'Expected {n} entries, got {len(row)}.']
                for index, row in enumerate(matrix) if len(row) != n
            }
            if row_errors:
                errors[name] = row_errors
        if errors:
            raise serializers.ValidationError(errors)
        return data

    def create(self, validated_data):
        label = validated_data['label'] or self.context.get('label', '')
        try:
            network = HopfieldNetwork(
                a=validated_data['a'],
                W=validated_data['W'],
                activations=[activation_from_data(item) for item in validated_data['activations']],
                theta=validated_data.get('theta'),
                L=validated_data.get('L'),
                inputs=validated_data.get('inputs'),
                x_star=validated_data.get('x_star'),
                label=label,
            )
            system = compile_network(network)
        except UnsupportedFeatureError as exc:
            raise serializers.ValidationError({'inputs': [str(exc)]})
        except (NotAnEquilibriumError, EquilibriumError) as exc:
            raise serializers.ValidationError({'x_star': [str(exc)]})
        except LyapcertError as exc:
            raise serializers.ValidationError({api_settings.NON_FIELD_ERRORS_KEY: [str(exc)]})
        return LoadedSystem(
            system=system,
            kind='hopfield',
            network=network,
            builtin=self.context.get('builtin'),
            overrides=dict(validated_data.get('analysis', {})),
        )


class BuiltinSystemSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=['builtin'])
    name = serializers.ChoiceField(choices=list(BUILTIN_NAMES))
    analysis = AnalysisOverridesSerializer(required=False)

    def create(self, validated_data):
        """Validate and build the stored definition; this file's overrides win."""
        name = validated_data['name']
        definition = builtin_definition(name)
        serializer = SYSTEM_SERIALIZERS[definition['kind']](
            data=definition, context={'builtin': name, 'label': name})
        serializer.is_valid(raise_exception=True)
        loaded = serializer.save()
        overrides = {**loaded.overrides, **validated_data.get('analysis', {})}
        return attrs.evolve(loaded, overrides=overrides)


SYSTEM_SERIALIZERS = {
    'expressions': ExpressionSystemSerializer,
    'hopfield': HopfieldSystemSerializer,
    'builtin': BuiltinSystemSerializer,
}


# --- Loading ---

def _reject_constant(text):
    return NonFiniteLiteral(text)


def parse_system_text(text):
    """JSON text to Python data; NaN/Infinity survive as NonFiniteLiteral markers."""
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise serializers.ValidationError(
            {api_settings.NON_FIELD_ERRORS_KEY: [f'Invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno}).']})


def load_system(data):
    """Validate a system-file document and build its system."""
    if not isinstance(data, Mapping):
        raise serializers.ValidationError({api_settings.NON_FIELD_ERRORS_KEY: ['Expected a JSON object.']})
    kind = data.get('kind')
    serializer_class = SYSTEM_SERIALIZERS.get(kind) if isinstance(kind, str) else None
    if serializer_class is None:
        choices = ', '.join(f'"{name}"' for name in SYSTEM_SERIALIZERS)
        raise serializers.ValidationError({'kind': [f'Expected one of {choices}.']})
    serializer = serializer_class(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def _escape_pointer(token):
    return str(token).replace('~', '~0').replace('/', '~1')


def json_pointer_errors(detail, prefix=''):
    """
    Flatten DRF's nested error structure to {json-pointer: [messages]}.
    Non-field errors attach to the pointer of the enclosing object.
    """
    flat = {}
    if isinstance(detail, Mapping):
        for key, value in detail.items():
            pointer = prefix if key == api_settings.NON_FIELD_ERRORS_KEY else f'{prefix}/{_escape_pointer(key)}'
            for path, messages in json_pointer_errors(value, pointer).items():
                flat.setdefault(path, []).extend(messages)
    elif isinstance(detail, (list, tuple)):
        if all(not isinstance(item, (Mapping, list, tuple)) for item in detail):
            flat[prefix] = [str(item) for item in detail]
        else:
            for index, item in enumerate(detail):
                if item:
                    for path, messages in json_pointer_errors(item, f'{prefix}/{index}').items():
                        flat.setdefault(path, []).extend(messages)
    else:
        flat[prefix] = [str(detail)]
    return flat


# --- Report rendering ---

class VectorField(serializers.Field):
    """numpy vector (or list of vectors) as nested lists of floats."""

    def to_representation(self, value):
        return _floats(value)


def _floats(value):
    if hasattr(value, 'tolist'):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return [_floats(item) for item in value]
    return float(value)


class RadiusField(serializers.Field):

    def to_representation(self, value):
        return 'unbounded' if math.isinf(value) else float(value)


class BetaEvidenceSerializer(serializers.Serializer):
    sup = VectorField()
    argmax = VectorField()
    sample_count = serializers.IntegerField()
    max_est_error = serializers.FloatField()
    conditions = serializers.DictField(child=serializers.BooleanField())


class StabilityVerdictSerializer(serializers.Serializer):
    variant = serializers.CharField()
    classification = serializers.CharField()
    certified_radius = RadiusField()
    horizon = serializers.FloatField(allow_null=True)
    margin = serializers.FloatField()
    evidence = BetaEvidenceSerializer()
    violation_witness = VectorField(allow_null=True)
    witness_betas = VectorField(allow_null=True)


class KrasovskiiReportSerializer(serializers.Serializer):
    P = VectorField()
    max_eig_field = serializers.FloatField()
    argmax = VectorField()
    verdict = serializers.CharField()
    witness = VectorField(allow_null=True)
    classification = serializers.CharField()
    sample_count = serializers.IntegerField()
    horizon = serializers.FloatField(allow_null=True)


class RegionSearchSerializer(serializers.Serializer):
    radius = serializers.FloatField()
    r_max = serializers.FloatField()
    tol = serializers.FloatField()
    evaluations = serializers.IntegerField()
    passes_at_radius = serializers.BooleanField()
    fails_above = serializers.BooleanField(allow_null=True)


class ConvergenceSummarySerializer(serializers.Serializer):
    count = serializers.IntegerField()
    converged = serializers.IntegerField()
    diverged = serializers.IntegerField()
    fraction_converged = serializers.FloatField()
    max_terminal_norm = serializers.FloatField()
    monotonicity_violations = serializers.IntegerField()
    radius = serializers.FloatField()
    t_end = serializers.FloatField()
    seed = serializers.IntegerField()
    integrator = serializers.CharField()


class TrajectorySummarySerializer(serializers.Serializer):
    """One line of the simulate command's summary, per trajectory."""
    index = serializers.IntegerField()
    x0 = VectorField()
    terminal_norm = serializers.FloatField()
    steps = serializers.IntegerField()
    diverged = serializers.BooleanField()
    monotonicity_violations = serializers.IntegerField()
    csv = serializers.CharField(allow_null=True)
