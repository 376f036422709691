"""Single-photon Toffoli gate on polarization and orbital angular momentum.

Qubit 1 is the photon's polarization; qubits 2-3 live in four OAM values.
Modules, bottom up: ``hilbert`` (modes, states, encoding), ``elements``
(optical components), ``network`` (circuits, calibration), ``experiment``
(noise, counts, crosstalk), ``tomography`` (MLE reconstruction, fidelities)
and ``cli``.
"""

from .hilbert import (
    DensityMatrix,
    LogicalEncoding,
    ModeLabel,
    Space,
    StateVector,
    TOFFOLI_ENCODING,
    encode_logical,
    logical_to_physical,
    n_qubit_encoding,
)
from .network import (
    Circuit,
    build_toffoli_blocks,
    build_toffoli_elements,
    calibrate,
    calibrated_toffoli,
    compose,
    ideal_toffoli,
    process_fidelity,
)
from .experiment import NoiseModel, cnot_crosstalk, truth_table
from .tomography import bell_scenarios, fidelity, fidelity_grid, mle_reconstruct

__version__ = "0.1.0"
