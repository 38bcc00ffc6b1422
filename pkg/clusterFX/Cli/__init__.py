# __init__.py
from .cli import *

__all__ = ['cli']
