"""
oqs_eom/__init__.py
Reduced open-system dynamics through the frequency-dependent effective Liouville
"""

__version__ = "1.0.0"

from oqs_eom.models import CompositeModel, catalog_model
from oqs_eom.state import Pipeline, build_pipeline

__all__ = ["CompositeModel", "catalog_model", "Pipeline", "build_pipeline", "__version__"]
