"""Structured vs. unstructured traffic environments from trajectory features."""
from .config import Thresholds
from .trajstore import AgentKind, DatasetBundle, SceneMeta, Track

__version__ = "0.1.0"

__all__ = ["AgentKind", "DatasetBundle", "SceneMeta", "Thresholds", "Track", "__version__"]
