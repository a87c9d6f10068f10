"""Secret-shared set archive with serial-interpolation membership queries."""

from sif.archive import RepositoryState, ShareVector, create_archive, element_count, insert
from sif.csif_protocol import TOY_GROUP, GroupElement, GroupParams, run_csif_query
from sif.field import DEFAULT_FIELD, FieldElement, FieldParams
from sif.shamir import Share, SharingPolicy, lagrange_basis_at_zero, reconstruct, split
from sif.sif_protocol import run_query
from sif.transport.messages import Scheme
from sif.transport.sim import SimNetwork, Tap

__all__ = [
    "DEFAULT_FIELD", "FieldElement", "FieldParams", "GroupElement", "GroupParams", "RepositoryState",
    "Scheme", "Share", "ShareVector", "SharingPolicy", "SimNetwork", "TOY_GROUP", "Tap",
    "create_archive", "element_count", "insert", "lagrange_basis_at_zero", "reconstruct",
    "run_csif_query", "run_query", "split",
]
