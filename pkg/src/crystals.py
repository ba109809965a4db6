"""
Built-in materials and the named-crystal registry

LiIO3 uses the handbook pole form (λ in μm, 0.3 to 5.5 μm):
    n_o² = 3.415716 + 0.047031/(λ² − 0.035306) − 0.008801·λ²
    n_e² = 2.918692 + 0.035145/(λ² − 0.028224) − 0.003641·λ²
"""
from typing import Callable, Dict

from src.dispersion import ConstantIndexModel, DispersionModel, PoleSellmeierModel, PoleTerms

LIIO3_WINDOW_NM = (300.0, 5500.0)


def liio3() -> PoleSellmeierModel:
    return PoleSellmeierModel(
        ordinary=PoleTerms(a=3.415716, poles=((0.047031, 0.035306),), d=0.008801, window_nm=LIIO3_WINDOW_NM),
        extraordinary=PoleTerms(a=2.918692, poles=((0.035145, 0.028224),), d=0.003641, window_nm=LIIO3_WINDOW_NM),
        name="LiIO3",
    )


def vacuum() -> ConstantIndexModel:
    return ConstantIndexModel(1.0, name="vacuum")


MATERIALS: Dict[str, Callable[[], DispersionModel]] = {
    "LiIO3": liio3,
    "vacuum": vacuum,
}

# `crystal = "<name>"` in a run configuration expands to one of these sections
CRYSTAL_REGISTRY: Dict[str, dict] = {
    "LiIO3-10mm-default": {"name": "LiIO3", "material": "LiIO3", "length_mm": 10.0},
    "LiIO3-5mm-default": {"name": "LiIO3", "material": "LiIO3", "length_mm": 5.0},
    "LiIO3-fig1": {"name": "LiIO3", "material": "LiIO3", "length_mm": 5.0},
    "LiIO3-5mm-400nm": {"name": "LiIO3", "material": "LiIO3", "length_mm": 5.0},
    "vacuum-test": {"name": "vacuum", "material": "vacuum", "length_mm": 10.0},
}


def material(name: str) -> DispersionModel:
    try:
        return MATERIALS[name]()
    except KeyError:
        raise KeyError(f"unknown material '{name}', known: {sorted(MATERIALS)}") from None
