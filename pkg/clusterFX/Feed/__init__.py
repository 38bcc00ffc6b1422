# __init__.py
from .codec import *

__all__ = ['codec']
