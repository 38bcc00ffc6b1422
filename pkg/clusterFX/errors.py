class ClusterFXError(Exception):
    '''Root of every domain error raised by the package.'''


class ConfigError(ClusterFXError):
    '''A configuration value violates its invariant. (field) is the dotted path of the offending value.'''

    def __init__(self, field:str, message:str):
        self.field = field
        self.message = message
        super().__init__(f'{field}: {message}')


class OrderRejected(ClusterFXError):
    '''The book refused an order operation (duplicate or unknown order id).'''


class FeedParseError(ClusterFXError):
    '''A feed line could not be parsed.'''

    def __init__(self, line:int, field:str, message:str):
        self.line = line
        self.field = field
        super().__init__(f'line {line}, field {field}: {message}')


class FeedTruncatedError(FeedParseError):
    '''The feed ended in the middle of a record.'''

    def __init__(self, line:int, message:str='feed ends without a complete record'):
        super().__init__(line, 'record', message)


class StatisticError(ClusterFXError):
    '''A statistic was requested on an input it is not defined for.'''
