"""
Confluent SUSY Toolkit - Confluent supersymmetric (Darboux) transformations
"""

from .config import RunConfig, load_config
from .jordan_chain import ChainSpec, JordanChain, build_chain
from .pipeline import ConfluentTransformPipeline
from .schrodinger_core import Grid, PoschlTeller, SampledFunction, Tabulated, Transformed
from .spectral_check import DiscreteHamiltonian, build_hamiltonian, lowest_eigenvalues
from .susy_transform import RegularityReport, TransformResult, run_transform
from .wronskian import WronskianTower, build_tower

__all__ = [
    'ChainSpec',
    'ConfluentTransformPipeline',
    'DiscreteHamiltonian',
    'Grid',
    'JordanChain',
    'PoschlTeller',
    'RegularityReport',
    'RunConfig',
    'SampledFunction',
    'Tabulated',
    'TransformResult',
    'Transformed',
    'WronskianTower',
    'build_chain',
    'build_hamiltonian',
    'build_tower',
    'load_config',
    'lowest_eigenvalues',
    'run_transform',
]
