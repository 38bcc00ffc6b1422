# __init__.py
from .book_stats import *
from .digits import *
from .series import *
from .volumes import *
from .tables import *

__all__ = ['book_stats', 'digits', 'series', 'volumes', 'tables']
