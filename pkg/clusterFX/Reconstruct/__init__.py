# __init__.py
from .reconstruct import *

__all__ = ['reconstruct']
