import logging
from pathlib import Path

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
plt.style.use('dark_background')
import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# How each statistic table is drawn; anything not listed is drawn as lines.
styles = {
    'shape': {'kind': 'bar', 'xlabel': 'distance from best (ticks)', 'ylabel': 'mean volume'},
    'gap': {'kind': 'line', 'xlabel': 'level', 'ylabel': 'gap (ticks)'},
    'spread': {'kind': 'bar', 'columns': ['probability'], 'xlabel': 'spread (ticks)', 'ylabel': 'probability'},
    'placement': {'kind': 'bar', 'xlabel': 'delta (ticks)', 'ylabel': 'probability'},
    'placement_by_digit': {'kind': 'heatmap', 'xlabel': 'best-quote digit', 'ylabel': 'delta (ticks)'},
    'event_correlation': {'kind': 'heatmap', 'xlabel': '', 'ylabel': ''},
    'event_acf': {'kind': 'acf', 'xlabel': 'lag (windows)', 'ylabel': 'autocorrelation'},
    'sign_memory': {'kind': 'acf', 'xlabel': 'lag (windows)', 'ylabel': 'autocorrelation'},
    'trade_digits': {'kind': 'digits', 'xlabel': 'last digit', 'ylabel': 'frequency'},
    'limit_digits': {'kind': 'digits', 'xlabel': 'last digit', 'ylabel': 'frequency'},
    'barrier': {'kind': 'digits', 'xlabel': 'last digit of the best quote', 'ylabel': 'frequency'},
    'volumes': {'kind': 'loglog', 'xlabel': 'volume', 'ylabel': 'probability'},
}


class Draw(object):
    '''Saves the statistic tables of a session as SVG figures.'''

    def __init__(self, width:float=8.0):
        self.width = width

    def figure(self):
        fig = plt.figure(figsize=plt.figaspect(0.6) * self.width / plt.figaspect(0.6)[0])
        return fig, fig.add_subplot(111)

    def plot_bar(self, ax, table:pd.DataFrame, columns:list):
        n = len(columns)
        width = 0.8 / n
        x = np.arange(len(table.index))
        for k, column in enumerate(columns):
            ax.bar(x + (k - (n - 1) / 2) * width, table[column].astype(float), width=width, label=column)
        step = max(1, len(x) // 20)
        ax.set_xticks(x[::step])
        ax.set_xticklabels([str(v) for v in table.index[::step]])

    def plot_digits(self, ax, table:pd.DataFrame):
        '''Frequencies per digit with their 95% intervals, next to the uniform 10% line.'''
        labels = [c[:-len('_frequency')] for c in table.columns if c.endswith('_frequency')]
        width = 0.8 / len(labels)
        for k, label in enumerate(labels):
            x = table.index.to_numpy() + (k - (len(labels) - 1) / 2) * width
            ax.bar(x, table[f'{label}_frequency'], width=width, yerr=table[f'{label}_half_width'], label=label)
        ax.axhline(0.1, color='w', linestyle=':')
        ax.set_xticks(range(10))

    def plot_acf(self, ax, table:pd.DataFrame):
        band = float(table['band'].iloc[0])
        for column in table.columns:
            if column == 'band' or column.endswith('_cumulative'):
                continue
            ax.plot(table.index[1:], table[column].iloc[1:], label=column)
        ax.axhspan(-band, band, color='w', alpha=0.15)

    def plot_heatmap(self, ax, table:pd.DataFrame):
        image = ax.imshow(table.to_numpy(dtype=float), aspect='auto', cmap='viridis')
        ax.set_xticks(range(len(table.columns)))
        ax.set_xticklabels([str(c) for c in table.columns], rotation=45)
        ax.set_yticks(range(len(table.index)))
        ax.set_yticklabels([str(i) for i in table.index])
        ax.figure.colorbar(image, ax=ax)

    def plot_table(self, name:str, table:pd.DataFrame, path) -> Path:
        '''This method draws one statistic table and saves it as SVG.

        :param name: The statistic name, which picks the style of the figure.
        :param table: The table computed by the analytics module.
        :param path: Where to write the figure.
        :return: The path of the SVG file.
        '''
        assert isinstance(table, pd.DataFrame), 'The (table) parameter must be a pandas DataFrame.'
        style = styles.get(name, {'kind': 'line', 'xlabel': '', 'ylabel': ''})
        fig, ax = self.figure()
        numeric = table.select_dtypes(include='number')
        kind = style['kind']
        if kind == 'bar':
            self.plot_bar(ax, numeric, style.get('columns', list(numeric.columns)))
        elif kind == 'digits':
            self.plot_digits(ax, numeric)
        elif kind == 'acf':
            self.plot_acf(ax, numeric)
        elif kind == 'heatmap':
            self.plot_heatmap(ax, numeric)
        elif kind == 'loglog':
            for column in numeric.columns:
                values = numeric[column][numeric[column] > 0]
                ax.loglog(values.index, values, 'o', markersize=3, label=column)
        else:
            numeric.plot(ax=ax)
        ax.set_title(name.replace('_', ' '))
        ax.set_xlabel(style['xlabel'])
        ax.set_ylabel(style['ylabel'])
        if kind != 'heatmap' and ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=8)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format='svg', bbox_inches='tight')
        plt.close(fig)
        logger.debug('Saved %s to %s.', name, path)
        return path

    def draw_tables(self, tables:dict, directory) -> list:
        '''Draws every (name, table) pair to <directory>/<name>.svg. Tables without numbers are skipped.'''
        paths = []
        for name, table in tables.items():
            if table.select_dtypes(include='number').empty:
                logger.info('Nothing to draw for %s.', name)
                continue
            paths.append(self.plot_table(name, table, Path(directory) / f'{name}.svg'))
        return paths
