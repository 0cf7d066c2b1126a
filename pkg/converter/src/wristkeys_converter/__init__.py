"""Offline converters into the wristkeys portable formats, plus parity checks."""

from .checkpoints import convert_checkpoint, load_name_map
from .hdf5_sessions import convert_session
from .parity import greedy_cer_parity, logit_parity
from .reference_model import ReferenceEncoder, build_reference_model
from .report import ConversionReport

__version__ = "0.1.0"
