"""Evolved gene-regulatory-network neuromodulation of SGD and Adam."""
from . import data, grn, grneat, harness, neuromod, nn, optimizers
from .grn import Genome, GrnConfig, Kind, Protein
from .neuromod import ControllerBank

__version__ = "0.1.0"
