# __init__.py
from .arrivals import *
from .agents import *
from .config import *
from .session import *

__all__ = ['arrivals', 'agents', 'config', 'session']
