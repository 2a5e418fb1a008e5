"""Seeded synthetic datasets: uniform instances and an Adult-schema lookalike."""

from __future__ import annotations

import numpy as np

from .core import Dataset, InvalidInputError


def uniform_instance(p: int, d: int, n_colors: int, seed: int = 0) -> Dataset:
    """Quasi-identifiers uniform on ``[0, 1]^d``, colors uniform on ``0..n_colors-1``."""
    if p < 1 or d < 1 or n_colors < 1:
        raise InvalidInputError("p, d and the number of colors must be positive")
    rng = np.random.default_rng(seed)
    X = rng.random((p, d))
    colors = rng.integers(0, n_colors, size=p)
    return Dataset.from_arrays(
        X,
        colors,
        ids=[str(i + 1) for i in range(p)],
        color_names=[f"c{c}" for c in range(n_colors)],
        qi_names=tuple(f"x{a + 1}" for a in range(d)),
    )


OCCUPATIONS = (
    "Prof-specialty",
    "Craft-repair",
    "Exec-managerial",
    "Adm-clerical",
    "Sales",
    "Other-service",
    "Machine-op-inspct",
    "Transport-moving",
    "Handlers-cleaners",
    "Farming-fishing",
    "Tech-support",
    "Protective-serv",
    "Priv-house-serv",
)
_OCC_FREQ = np.array([12.7, 12.6, 12.5, 11.6, 11.2, 10.1, 6.1, 4.9, 4.2, 3.1, 2.8, 2.0, 0.5])
# how strongly each occupation leans toward more schooling (per 3 years of education)
_OCC_EDU = np.array([1.2, -0.3, 0.8, 0.1, 0.1, -0.6, -0.6, -0.5, -0.8, -0.5, 0.4, 0.0, -0.9])
# male-share tilt
_OCC_SEX = np.array([0.0, 1.5, 0.4, -1.0, 0.1, -0.5, 0.5, 1.3, 1.0, 1.2, 0.0, 1.2, -2.0])
_EDU_LEVELS = np.arange(1, 17)
_EDU_FREQ = np.array([0.2, 0.5, 1.0, 2.0, 1.6, 2.9, 3.6, 1.3, 32.3, 22.3, 4.2, 3.3, 16.4, 5.3, 1.8, 1.3])


def adult_like(p: int, seed: int = 0) -> Dataset:
    """Synthetic rows with the Adult schema used for m-invariance experiments.

    Quasi-identifiers are age (17-90), sex (0 female, 1 male) and
    education-num (1-16); occupation is sensitive, drawn from 13 values with
    Adult-like marginals and a dependence on education and sex.
    """
    if p < 1:
        raise InvalidInputError("p must be positive")
    rng = np.random.default_rng(seed)
    age = np.clip(np.round(rng.normal(38.6, 13.6, size=p)), 17, 90)
    sex = (rng.random(p) < 0.67).astype(float)
    edu = rng.choice(_EDU_LEVELS, size=p, p=_EDU_FREQ / _EDU_FREQ.sum()).astype(float)
    logits = (
        np.log(_OCC_FREQ)[None, :]
        + _OCC_EDU[None, :] * ((edu[:, None] - 10.0) / 3.0)
        + _OCC_SEX[None, :] * (sex[:, None] - 0.67)
    )
    prob = np.exp(logits - logits.max(axis=1, keepdims=True))
    prob /= prob.sum(axis=1, keepdims=True)
    u = rng.random(p)
    occ = np.minimum((prob.cumsum(axis=1) < u[:, None]).sum(axis=1), len(OCCUPATIONS) - 1)
    return Dataset.from_arrays(
        np.column_stack([age, sex, edu]),
        occ,
        ids=[str(i + 1) for i in range(p)],
        color_names=list(OCCUPATIONS),
        qi_names=("age", "sex", "education-num"),
    )
