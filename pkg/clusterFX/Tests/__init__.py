from .test_book import *
from .test_feed import *
from .test_flow import *
from .test_reconstruct import *
from .test_analytics import *
from .test_cli import *

__all__ = ['test_book', 'test_feed', 'test_flow', 'test_reconstruct', 'test_analytics', 'test_cli']
