#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains the logger interface along with concrete realizations for each tracker and for the benchmark harness.

Remarks: 

- All vectors are treated as of type [n,]
- Console output is a ``tabulate`` grid per step, file output is one CSV row per step

"""

import csv

from tabulate import tabulate


class Logger:
    """
    Interface class for data loggers.
    Concrete loggers, associated with concrete trackers or runners, should be built upon this class.
    To design a concrete logger: inherit this class, override:
        | :func:`~loggers.Logger.print_sim_step` :
        | print a row of data of a single step, typically into the console (required).
        | :func:`~loggers.Logger.log_data_row` :
        | same as above, but write to a file (required).
    
    """
    
    def print_sim_step(self, *args):
        raise NotImplementedError
    
    def log_data_row(self, datafile, *args):
        raise NotImplementedError

    @staticmethod
    def _append_row(datafile, row):
        with open(datafile, 'a', newline='') as outfile:
            writer = csv.writer(outfile)
            writer.writerow(row)


class LoggerNorst(Logger):
    """
    Data logger for the NORST tracker: frame index, support size, outlier norm, projected residual, phase and update counter.
    
    """
    header = ['t', '|T|', '||x||', 'residual', 'phase', 'k']

    def print_sim_step(self, t, support_size, xhat_norm, residual, phase, k):
        row_data = [t, support_size, xhat_norm, residual, phase, k]
        row_format = ('d', 'd', '8.3f', '8.2e', '', 'd')
        table = tabulate([self.header, row_data], floatfmt=row_format, headers='firstrow', tablefmt='grid')
    
        print(table)
    
    def log_data_row(self, datafile, t, support_size, xhat_norm, residual, phase, k):
        self._append_row(datafile, [t, support_size, xhat_norm, residual, phase, k])


class LoggerGrouse(Logger):
    """
    Data logger for the GROUSE tracker.
    
    """
    header = ['t', '|Omega|', 'eps', 'theta', 'mu(r)']

    def print_sim_step(self, t, n_observed, eps, theta, mu_r):
        row_data = [t, n_observed, eps, theta, mu_r]
        row_format = ('d', 'd', '8.2e', '8.4f', '8.2f')
        table = tabulate([self.header, row_data], floatfmt=row_format, headers='firstrow', tablefmt='grid')
    
        print(table)

    def log_data_row(self, datafile, t, n_observed, eps, theta, mu_r):
        self._append_row(datafile, [t, n_observed, eps, theta, mu_r])


class LoggerBench(Logger):
    """
    Data logger for benchmark runs: one row per (scenario, algorithm, trial).
    
    """
    header = ['scenario', 'algo', 'seed', 'rel_err', 'final SE', 'wall [ms]', 'error']

    def print_sim_step(self, scenario, algo, seed, rel_err, final_se, wall_ms, error):
        row_data = [scenario, algo, seed, rel_err, final_se, wall_ms, error or '']
        row_format = ('', '', 'd', '8.3e', '8.3e', '8.1f', '')
        table = tabulate([self.header, row_data], floatfmt=row_format, headers='firstrow', tablefmt='grid')

        print(table)

    def log_data_row(self, datafile, scenario, algo, seed, rel_err, final_se, wall_ms, error):
        self._append_row(datafile, [scenario, algo, seed, rel_err, final_se, wall_ms, error or ''])

    def print_summary(self, summary, not_implemented=()):
        """
        Print the aggregated table: one row per (scenario, algorithm).

        """
        rows = []
        for scenario, algos in summary.items():
            for algo, entry in algos.items():
                rel = entry['rel_err']
                rows.append([scenario, algo, rel['mean'], rel['std'], entry['trials'], entry['failures']])
        for algo in not_implemented:
            rows.append(['', algo, float('nan'), float('nan'), 0, 'not implemented'])
        print(tabulate(rows, headers=['scenario', 'algo', 'mean rel_err', 'std', 'trials', 'failures'],
                       floatfmt='.3e', tablefmt='grid'))
