"""Shared builders for collocation tests."""

from pathlib import Path
from typing import Optional, Sequence

import pytest

from collocation.config import SolverOptions
from collocation.models import (
    CollocationParameters,
    KernelSpec,
    Mesh,
    NonlinearitySpec,
    make_problem,
)

PROFILES_DIR = Path(__file__).resolve().parent.parent / "profiles"


def power_problem(
    h: float = 0.1,
    c: Sequence[float] = (0.5,),
    a: float = 1.0,
    b: float = 2.0,
    T: float = 1.0,
    options: Optional[SolverOptions] = None,
):
    """y = int_0^t (t-s)^a y(s)^(1/b) ds on a uniform mesh with stepsize h."""
    return make_problem(
        KernelSpec.power_convolution(a),
        NonlinearitySpec.power_root(b),
        Mesh.from_stepsize(T, h),
        CollocationParameters(tuple(c)),
        options,
    )


def problem_with(kernel=None, nonlinearity=None, mesh=None, c: Sequence[float] = (0.5,), options=None):
    return make_problem(
        kernel or KernelSpec.power_convolution(1.0),
        nonlinearity or NonlinearitySpec.power_root(2.0),
        mesh or Mesh.uniform(1.0, 10),
        CollocationParameters(tuple(c)),
        options,
    )


@pytest.fixture
def sqrt_G():
    return NonlinearitySpec.power_root(2.0)


@pytest.fixture
def linear_kernel():
    """k(u) = u."""
    return KernelSpec.power_convolution(1.0)


@pytest.fixture
def unit_kernel():
    """K = 1."""
    return KernelSpec.constant(1.0)


def write_config(tmp_path, text: str, name: str = "run.conf") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path
