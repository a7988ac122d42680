"""
Lazy construction of the objects every run of one model shares.

Chain coefficients, the star-basis transform and gate sets are built on
first use and cached, so repeated runs (scans, resumed runs) do not
rebuild them.
"""

from __future__ import annotations

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .config import ModelParams
from .hamiltonian import LocalHamiltonian
from .model import ChainCoefficients, StarBath, chain_coefficients, chain_to_star
from .tebd import GateSet, spin_boson_gates

logger = logging.getLogger(__name__)

GateKey = Tuple[bytes, str, bool]


class ModelFactory:
    """
    Lazy creator for the chain mapping and gate sets of one ModelParams.

    Maintains single instances for reuse, only building them on first use.
    """

    def __init__(self, params: ModelParams) -> None:
        """
        Initialize the factory.

        Args:
            params: Model whose objects are built
        """
        self.params = params
        self._chain: Optional[ChainCoefficients] = None
        self._star: Optional[StarBath] = None
        self._gates: Dict[GateKey, Tuple[GateSet, LocalHamiltonian]] = {}

    def chain(self) -> ChainCoefficients:
        """Get or create the chain coefficients."""
        if self._chain is None:
            self._chain = chain_coefficients(self.params)
        return self._chain

    def star(self) -> StarBath:
        """Get or create the inverse (chain to star) mapping."""
        if self._star is None:
            self._star = chain_to_star(self.chain())
        return self._star

    def gates(
        self,
        shifts: Optional[Sequence[float]] = None,
        kind: str = "real",
        ancilla: bool = False,
    ) -> Tuple[GateSet, LocalHamiltonian]:
        """
        Get or create the gates of the full Hamiltonian in a given frame.

        Returns:
            The GateSet and the Hamiltonian in the same frame
        """
        frame = None if shifts is None or not np.any(shifts) else np.asarray(shifts, dtype=float)
        key = (b"" if frame is None else frame.tobytes(), kind, ancilla)
        if key not in self._gates:
            logger.debug("Building %s-time gates (ancilla=%s)", kind, ancilla)
            self._gates[key] = spin_boson_gates(self.chain(), self.params, frame, kind, ancilla)
        return self._gates[key]
