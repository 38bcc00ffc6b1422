
__all__ = ['Book', 'Flow', 'Feed', 'Reconstruct', 'Analytics', 'Draw', 'Cli', 'Tests']
