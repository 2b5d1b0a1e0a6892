"""Matching pursuits over pseudo-random sequences of time-frequency subdictionaries."""

from .dictionary import (AtomParam, DictConfig, Family, SubdictSpec, Window, atom, dict_size,
                         gabor_atom, mdct_atom, project)
from .pursuit import Approximant, PursuitConfig, Variant, run
from .signal import Signal, load_wav, save_wav, snr, srr
from .subseq import SequenceKind, SequenceSpec, shift_at, subdict_at

__all__ = [
    "AtomParam", "DictConfig", "Family", "SubdictSpec", "Window", "atom", "dict_size",
    "gabor_atom", "mdct_atom", "project", "Approximant", "PursuitConfig", "Variant", "run",
    "Signal", "load_wav", "save_wav", "snr", "srr", "SequenceKind", "SequenceSpec",
    "shift_at", "subdict_at",
]

__version__ = "0.1.0"
