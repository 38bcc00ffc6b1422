# __init__.py
from .instruments import *
from .book import *

__all__ = ['instruments', 'book']
