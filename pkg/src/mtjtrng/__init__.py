"""Simulation of an asynchronous STT-MTJ true random number generator.

N in-plane MTJs, initialized anti-parallel, discharge a capacitor through
their series resistances; each either switches to parallel or not, and the
N read-out states form one output word.
"""

from .circuit import CircuitState, EnableTrace, simulate_enable, step_circuit
from .config import CircuitParams, ConfigError, CostModel, TrngConfig, load_config, nominal_config
from .distribution import EmpiricalDistribution, estimate_distribution
from .entropy import (
    Bitstream,
    EntropyReport,
    entropy_report,
    min_entropy,
    pack_bitstream,
    shannon_entropy,
    unpack_bitstream,
    xor_chain,
    xor_chain_inverse,
)
from .magnetics import (
    DeviceInstance,
    Environment,
    FieldSpec,
    IntegrationError,
    MtjElectrical,
    MtjGeometry,
    MtjMaterial,
    demag_factors,
    external_field_at,
    llg_step_midpoint,
    mtj_resistance,
    thermal_field_std,
)
from .montecarlo import (
    SweepPlan,
    VariationSpec,
    calibrate_series_resistance,
    run_trials,
    run_words,
    sample_variation,
    sweep,
    temperature_adjust,
    variation_ensemble,
)
from .nist import NistSuiteResult, nist_test, run_suite
from .protocol import (
    TimingEnergyReport,
    TrngWord,
    energy_report,
    generate_word,
    read_step,
    reset_step,
    timing_report,
)

__version__ = "0.1.0"
