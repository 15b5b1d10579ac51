"""Hardware-aware model selection.

Ranks model variants (parameter count x quantization format) against a
device profile. Feasibility combines a 4-bit support check (Jetson-class
boards cannot run Q4 builds) with a memory estimate; ranking follows the
deployment mode: lowest weight traffic per token for realtime, highest
catalog benchmark score for accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import MedaideError

DEFAULT_OVERHEAD_FACTOR = 0.2

Q4_UNSUPPORTED = "Q4_UNSUPPORTED"
INSUFFICIENT_MEMORY = "INSUFFICIENT_MEMORY"

MODES = ("realtime", "accuracy")


class EmptyCatalog(MedaideError):
    pass


class Quant(Enum):
    F16 = "f16"
    Q8 = "q8"
    Q4 = "q4"

    @property
    def bits_per_weight(self) -> int:
        return {Quant.F16: 16, Quant.Q8: 8, Quant.Q4: 4}[self]


class DeviceClass(Enum):
    JETSON = "jetson"
    CONSUMER_GPU = "consumer_gpu"
    CPU_ONLY = "cpu_only"


@dataclass(frozen=True)
class HardwareProfile:
    """Device capabilities. supports_q4 defaults from the device class and
    is always False for Jetson boards regardless of the override."""

    name: str
    device_class: DeviceClass
    vram_bytes: int = 0
    ram_bytes: int = 0
    supports_q4: bool | None = None

    def __post_init__(self) -> None:
        if self.vram_bytes < 0 or self.ram_bytes < 0:
            raise MedaideError("memory sizes must be >= 0")
        if self.device_class is DeviceClass.JETSON:
            resolved = False
        elif self.supports_q4 is None:
            resolved = True
        else:
            resolved = bool(self.supports_q4)
        object.__setattr__(self, "supports_q4", resolved)

    @property
    def available_bytes(self) -> int:
        """Memory budget the model must fit in: VRAM for GPU classes, RAM otherwise."""
        if self.device_class is DeviceClass.CPU_ONLY:
            return self.ram_bytes
        return self.vram_bytes

    @classmethod
    def from_json(cls, obj: dict) -> "HardwareProfile":
        try:
            device_class = DeviceClass(obj["device_class"])
        except (KeyError, ValueError) as exc:
            raise MedaideError(f"bad device_class: {exc}") from exc
        return cls(
            name=str(obj.get("name", device_class.value)),
            device_class=device_class,
            vram_bytes=int(obj.get("vram_bytes", 0)),
            ram_bytes=int(obj.get("ram_bytes", 0)),
            supports_q4=obj.get("supports_q4"),
        )


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params_count: int
    quant: Quant
    accuracy_score: float
    notes: str = ""

    def __post_init__(self) -> None:
        if self.params_count <= 0:
            raise MedaideError(f"params_count must be > 0, got {self.params_count}")
        if not 0.0 <= self.accuracy_score <= 100.0:
            raise MedaideError(f"accuracy_score must be in [0, 100], got {self.accuracy_score}")

    @property
    def bits_per_weight(self) -> int:
        return self.quant.bits_per_weight

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "params_count": self.params_count,
            "quant": self.quant.value,
            "accuracy_score": self.accuracy_score,
            "notes": self.notes,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelSpec":
        try:
            quant = Quant(obj["quant"])
        except (KeyError, ValueError) as exc:
            raise MedaideError(f"bad quant: {exc}") from exc
        return cls(
            name=str(obj["name"]),
            params_count=int(obj["params_count"]),
            quant=quant,
            accuracy_score=float(obj.get("accuracy_score", 0.0)),
            notes=str(obj.get("notes", "")),
        )


@dataclass(frozen=True)
class RankedEntry:
    spec: ModelSpec
    est_bytes: float
    latency_proxy: float
    feasible: bool
    violations: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "spec": self.spec.as_dict(),
            "est_bytes": self.est_bytes,
            "latency_proxy": self.latency_proxy,
            "feasible": self.feasible,
            "violations": list(self.violations),
        }


@dataclass(frozen=True)
class SelectionResult:
    chosen: ModelSpec | None
    ranked: tuple[RankedEntry, ...]

    def as_dict(self) -> dict:
        return {
            "chosen": self.chosen.as_dict() if self.chosen else None,
            "ranked": [e.as_dict() for e in self.ranked],
        }


def estimate_memory(spec: ModelSpec, overhead_factor: float = DEFAULT_OVERHEAD_FACTOR) -> float:
    """Deployed footprint in bytes: weights plus a KV-cache/activation margin."""
    if overhead_factor < 0:
        raise MedaideError(f"overhead_factor must be >= 0, got {overhead_factor}")
    return spec.params_count * spec.bits_per_weight / 8 * (1.0 + overhead_factor)


def check_compatibility(
    profile: HardwareProfile,
    spec: ModelSpec,
    overhead_factor: float = DEFAULT_OVERHEAD_FACTOR,
) -> list[str]:
    """Violation codes for running spec on profile; empty means feasible."""
    violations: list[str] = []
    if spec.quant is Quant.Q4 and not profile.supports_q4:
        violations.append(Q4_UNSUPPORTED)
    if estimate_memory(spec, overhead_factor) > profile.available_bytes:
        violations.append(INSUFFICIENT_MEMORY)
    return violations


def latency_proxy(spec: ModelSpec) -> float:
    """Weight traffic per generated token; monotone stand-in for latency."""
    return float(spec.params_count * spec.bits_per_weight)


def rank_candidates(
    profile: HardwareProfile,
    catalog: list[ModelSpec],
    mode: str = "accuracy",
    overhead_factor: float = DEFAULT_OVERHEAD_FACTOR,
) -> SelectionResult:
    """Rank every catalog entry for the device and pick the best feasible one.

    Feasible entries come first, ordered by the mode criterion (ascending
    latency proxy for realtime, descending accuracy score otherwise); ties
    fall back to smaller estimated footprint, then name. Infeasible entries
    trail, annotated with their violations.
    """
    if not catalog:
        raise EmptyCatalog("catalog must contain at least one model")
    if mode not in MODES:
        raise MedaideError(f"mode must be one of {MODES}, got {mode!r}")
    entries: list[RankedEntry] = []
    for spec in catalog:
        violations = check_compatibility(profile, spec, overhead_factor)
        entries.append(
            RankedEntry(
                spec=spec,
                est_bytes=estimate_memory(spec, overhead_factor),
                latency_proxy=latency_proxy(spec),
                feasible=not violations,
                violations=tuple(violations),
            )
        )

    def sort_key(e: RankedEntry):
        primary = e.latency_proxy if mode == "realtime" else -e.spec.accuracy_score
        return (not e.feasible, primary, e.est_bytes, e.spec.name)

    ranked = tuple(sorted(entries, key=sort_key))
    chosen = next((e.spec for e in ranked if e.feasible), None)
    return SelectionResult(chosen=chosen, ranked=ranked)


# --- Catalog -------------------------------------------------------------

# Published benchmark scores for the three baseline architectures; the Q4
# entries carry a fixed 2-point discount because 4-bit weights trade
# accuracy for size.
_BASE_MODELS = (
    ("OPT-125M", 125_000_000, 27.6),
    ("Bloom-560M", 560_000_000, 29.5),
    ("LLaMa2-7B", 7_000_000_000, 51.9),
)

Q4_SCORE_PENALTY = 2.0


def default_catalog() -> list[ModelSpec]:
    """Built-in catalog: each baseline model in F16, Q8, and Q4 builds."""
    catalog: list[ModelSpec] = []
    for base_name, params, score in _BASE_MODELS:
        for quant in (Quant.F16, Quant.Q8, Quant.Q4):
            penalty = Q4_SCORE_PENALTY if quant is Quant.Q4 else 0.0
            catalog.append(
                ModelSpec(
                    name=f"{base_name}-{quant.value.upper()}",
                    params_count=params,
                    quant=quant,
                    accuracy_score=score - penalty,
                    notes=f"{base_name} weights in {quant.value.upper()} format",
                )
            )
    return catalog


def load_catalog(path: str | Path) -> list[ModelSpec]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(obj, list):
        raise MedaideError("catalog file must be a JSON array")
    return [ModelSpec.from_json(e) for e in obj]


def preset_profiles() -> dict[str, HardwareProfile]:
    gb = 1_000_000_000
    return {
        "jetson-8gb": HardwareProfile(
            name="jetson-8gb", device_class=DeviceClass.JETSON, vram_bytes=8 * gb, ram_bytes=8 * gb
        ),
        "consumer-gpu-16gb": HardwareProfile(
            name="consumer-gpu-16gb",
            device_class=DeviceClass.CONSUMER_GPU,
            vram_bytes=16 * gb,
            ram_bytes=32 * gb,
        ),
        "cpu-32gb": HardwareProfile(
            name="cpu-32gb", device_class=DeviceClass.CPU_ONLY, vram_bytes=0, ram_bytes=32 * gb
        ),
    }
