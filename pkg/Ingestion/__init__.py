"""
Ingestion Module
Reads the mechanism + run configuration file and command-line overrides.
"""

from . import config_loader

__all__ = ['config_loader']
