import cmath
import math

from django.conf import settings
from rest_framework import serializers

from dfsim.analysis import TABLE_TRANSMITTANCES, SweepSpec
from dfsim.exceptions import ConfigurationError
from dfsim.protocol import ExperimentConfig, GammaConvention, Variant


def _probability(**kwargs) -> serializers.FloatField:
    return serializers.FloatField(required=False, min_value=0.0, max_value=1.0, **kwargs)


def validated(serializer: serializers.Serializer) -> dict:
    """
    Запускает валидацию и превращает ошибки DRF в ConfigurationError
    (в errors -- обычные строки, чтобы их можно было отдать в JSON).
    """
    if not serializer.is_valid():
        errors = {
            key: [str(message) for message in messages] if isinstance(messages, list) else str(messages)
            for key, messages in serializer.errors.items()
        }
        raise ConfigurationError("Validation error", errors=errors)
    return serializer.validated_data


class ExperimentConfigSerializer(serializers.Serializer):
    """
    Параметры ExperimentConfig из плоского конфига.
    Отвечает за:
    - приведение строк к числам/флагам
    - проверку диапазонов по каждому полю
    - межполевые правила (mu и mu_eta, амплитуды кубита)
    """

    gamma = serializers.FloatField(required=False, min_value=0.0)
    gamma_convention = serializers.ChoiceField(choices=[c.value for c in GammaConvention], required=False)
    mu = serializers.FloatField(required=False, min_value=0.0)
    mu_eta = serializers.FloatField(required=False, min_value=0.0)
    transmittance = _probability()
    eta = _probability()
    eta_g = _probability()
    dark_count = _probability()
    dark_count_e = _probability()
    dark_count_f = _probability()
    overlap = _probability()
    sigma_um = serializers.FloatField(required=False)
    delay_um = serializers.FloatField(required=False)
    gp_reflectance = _probability()
    source_fidelity = _probability()
    phase_steps = serializers.IntegerField(required=False, min_value=1)
    phase_delta = serializers.FloatField(required=False)
    cutoff = serializers.IntegerField(required=False, min_value=0, max_value=8)
    pair_cutoff = serializers.IntegerField(required=False, min_value=1)
    variant = serializers.ChoiceField(choices=[v.value for v in Variant], required=False)
    include_dbar_branch = serializers.BooleanField(required=False)
    qubit_alpha = serializers.FloatField(required=False)
    qubit_beta = serializers.FloatField(required=False)
    qubit_phase = serializers.FloatField(required=False)

    def validate_gamma(self, value: float) -> float:
        if value >= 0.5:
            raise serializers.ValidationError("gamma должна быть меньше 0.5.")
        return value

    def validate_sigma_um(self, value: float) -> float:
        if value <= 0:
            raise serializers.ValidationError("Ширина sigma_um должна быть положительной.")
        return value

    def validate(self, attrs: dict) -> dict:
        """
        Межполевая валидация:
        - mu и mu_eta взаимоисключающие, mu_eta делится на eta
        - кубит задаётся парой qubit_alpha/qubit_beta (фаза необязательна), нормируется
        """
        # 1) Средняя интенсивность у Алисы через mu*eta
        if "mu_eta" in attrs:
            if "mu" in attrs:
                raise serializers.ValidationError({"mu_eta": "Нельзя задавать одновременно mu и mu_eta."})
            eta = attrs.get("eta", ExperimentConfig.eta)
            if eta <= 0:
                raise serializers.ValidationError({"mu_eta": "Для mu_eta нужна положительная eta."})
            attrs["mu"] = attrs.pop("mu_eta") / eta

        # 2) Амплитуды кубита
        alpha = attrs.pop("qubit_alpha", None)
        beta = attrs.pop("qubit_beta", None)
        phase = attrs.pop("qubit_phase", None)
        if alpha is not None or beta is not None or phase is not None:
            if alpha is None or beta is None:
                raise serializers.ValidationError({"qubit_alpha": "Нужны обе амплитуды: qubit_alpha и qubit_beta."})
            norm = math.hypot(alpha, beta)
            if norm == 0:
                raise serializers.ValidationError({"qubit_alpha": "Амплитуды кубита не могут быть обе нулевыми."})
            attrs["qubit"] = (complex(alpha / norm), (beta / norm) * cmath.exp(1j * (phase or 0.0)))

        return attrs

    def to_config(self) -> ExperimentConfig:
        attrs = dict(validated(self))
        attrs.setdefault("cutoff", settings.DFSIM["CUTOFF"])
        return ExperimentConfig(**attrs)


class SweepSpecSerializer(serializers.Serializer):
    transmittances = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0), required=False, allow_empty=False,
    )
    anchor_transmittance = serializers.FloatField(required=False, min_value=0.0, max_value=1.0)
    anchor_visibility = serializers.FloatField(required=False, min_value=-1.0, max_value=1.0)

    def validate_transmittances(self, value: list[float]) -> list[float]:
        if any(t <= 0 for t in value):
            raise serializers.ValidationError("Пропускание точек развёртки должно быть положительным.")
        return value

    def to_spec(self, calibrate: bool = True) -> SweepSpec:
        data = validated(self)
        return SweepSpec(
            transmittances=tuple(data.get("transmittances", TABLE_TRANSMITTANCES)),
            anchor_transmittance=data.get("anchor_transmittance", 0.1),
            anchor_visibility=data.get("anchor_visibility", 0.82),
            calibrate=calibrate,
        )


class DelayScanSerializer(serializers.Serializer):
    delays_um = serializers.ListField(child=serializers.FloatField(), required=False, allow_empty=False)
    target_fwhm_um = serializers.FloatField(required=False)

    def validate_target_fwhm_um(self, value: float) -> float:
        if value <= 0:
            raise serializers.ValidationError("Ширина провала должна быть положительной.")
        return value


class SampleSerializer(serializers.Serializer):
    pulses = serializers.IntegerField(required=False, min_value=0)


class OracleSerializer(serializers.Serializer):
    oracle_configs = serializers.IntegerField(required=False, min_value=0)
    oracle_seed = serializers.IntegerField(required=False, min_value=0)


# Все ключи, которые понимает плоский конфиг
RUN_SERIALIZERS = (
    ExperimentConfigSerializer,
    SweepSpecSerializer,
    DelayScanSerializer,
    SampleSerializer,
    OracleSerializer,
)


def reject_unknown_keys(data: dict) -> None:
    known = set()
    for serializer_class in RUN_SERIALIZERS:
        known.update(serializer_class().fields)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError("Unknown configuration keys", errors={key: "unknown key" for key in unknown})


def pick(data: dict, serializer_class: type[serializers.Serializer]) -> dict:
    """Подмножество конфига, относящееся к одному сериализатору."""
    names = set(serializer_class().fields)
    return {key: value for key, value in data.items() if key in names}


# Это не ModelSerializer: строки таблиц -- вычисленные словари, а не объекты БД
class SweepRowSerializer(serializers.Serializer):
    transmittance = serializers.FloatField()
    v_z = serializers.FloatField()
    v_x = serializers.FloatField()
    f_low = serializers.FloatField()
    rate_per_pulse = serializers.FloatField()
    rate_per_second = serializers.FloatField()
    chsh_flag = serializers.BooleanField()


class DelayRowSerializer(serializers.Serializer):
    delay_um = serializers.FloatField()
    overlap = serializers.FloatField()
    p_r = serializers.FloatField()
    p_l = serializers.FloatField()
    visibility = serializers.FloatField()


class ScalingRowSerializer(serializers.Serializer):
    """Показатель степени одной компоненты по одному параметру."""
    variant = serializers.CharField()
    component = serializers.CharField()
    parameter = serializers.CharField()
    exponent = serializers.FloatField()
    stderr = serializers.FloatField()
