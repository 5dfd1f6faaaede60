"""
Shared fixtures for the confluent SUSY tests
"""

import os

import numpy as np
import pytest

from confluent_susy.config import load_config
from confluent_susy.jordan_chain import ChainSpec, build_chain, closed_form_constants
from confluent_susy.pipeline import ConfluentTransformPipeline
from confluent_susy.poschl_teller import PTParams
from confluent_susy.schrodinger_core import Grid, PoschlTeller

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(REPO_ROOT, "configs")

KAPPA_FIG1 = 1.0 / np.sqrt(2.0)
KAPPA_FIG2 = np.sqrt(1.5)


@pytest.fixture(scope="session")
def grid():
    return Grid()


@pytest.fixture(scope="session")
def potential():
    return PoschlTeller()


def integral_chain(kappa: float, order: int, grid: Grid):
    """Closed-form-matched chain built by nested integrals"""
    params = PTParams(kappa)
    spec = ChainSpec(params.lambda_, order, inner_constants=closed_form_constants(params, grid, order, "integral"))
    return build_chain(spec, PoschlTeller(), grid, residual_tol=1e-5)


@pytest.fixture(scope="session")
def chain_fig2(grid):
    return integral_chain(KAPPA_FIG2, 5, grid)


@pytest.fixture(scope="session")
def chain_kappa_one(grid):
    return integral_chain(1.0, 4, grid)


def _figure_pipeline(name: str, out_dir: str) -> ConfluentTransformPipeline:
    config = load_config(os.path.join(CONFIG_DIR, f"{name}.toml"), {"out": out_dir})
    pipeline = ConfluentTransformPipeline(config)
    pipeline.run_transform()
    return pipeline


@pytest.fixture(scope="session")
def fig1_pipeline(tmp_path_factory):
    return _figure_pipeline("fig1", str(tmp_path_factory.mktemp("fig1")))


@pytest.fixture(scope="session")
def fig2_pipeline(tmp_path_factory):
    return _figure_pipeline("fig2", str(tmp_path_factory.mktemp("fig2")))
