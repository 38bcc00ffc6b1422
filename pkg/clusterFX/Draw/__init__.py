# __init__.py
from .draw import *

__all__ = ['draw']
