#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Preset: GROUSE tracking a fixed subspace from partially observed, outlier-free frames.

"""

import os, sys
PARENT_DIR = os.path.abspath(__file__ + '/../..')
sys.path.insert(0, PARENT_DIR)
import slrtrack

if os.path.abspath(slrtrack.__file__ + "/../..") == PARENT_DIR:
    info = f"this script is being run using " \
           f"slrtrack ({slrtrack.__version__}) " \
           f"located in cloned repository at '{PARENT_DIR}'. " \
           f"If you are willing to use your locally installed slrtrack, " \
           f"run this script ('{os.path.basename(__file__)}') outside " \
           f"'slrtrack/presets'."
else:
    info = f"this script is being run using " \
           f"locally installed slrtrack ({slrtrack.__version__}). " \
           f"Make sure the versions match."
print("INFO:", info)

import pathlib
from datetime import datetime
import numpy as np

from slrtrack import simulator
from slrtrack import completion
from slrtrack import loggers
from slrtrack import scenarios
from slrtrack.linalg import principal_angle_stats
from slrtrack.linalg import random_basis
from slrtrack.utilities import rng_stream

import argparse

description = "Tracking preset: GROUSE on a fixed subspace with missing entries."

parser = argparse.ArgumentParser(description=description)

parser.add_argument('--n', type=int, default=50, help='Ambient dimension.')
parser.add_argument('--r', type=int, default=3, help='Subspace dimension.')
parser.add_argument('--tmax', type=int, default=5000, help='Number of frames.')
parser.add_argument('--p', type=float, default=1.0, help='Probability of observing an entry.')
parser.add_argument('--seed', type=int, default=0, help='Seed of data, mask and initialization.')
parser.add_argument('--step', type=str,
                    choices=['greedy', 'fixed'],
                    default='greedy',
                    help='Step size rule: greedy (arctan of residual over prediction norm) or fixed eta * |r| * |p|.')
parser.add_argument('--eta', type=float, default=0.1, help='Step size constant of the fixed rule.')
parser.add_argument('--print_every', type=int, default=250, help='Print every print_every frames.')
parser.add_argument('--is_log_data', type=bool,
                    default=False,
                    help='Flag to log data into a data file. Data are stored in simdata folder.')

args = parser.parse_args()

globals().update(vars(args))

#----------------------------------------Initialization : : data
L, P = scenarios.gen_fixed_lowrank(n, tmax, r, seed)
mask = scenarios.gen_missing_mask(n, tmax, p, rng_stream(seed, 'observed'))
Phat0 = random_basis(n, r, rng_stream(seed, 'init'))

#----------------------------------------Initialization : : tracker
my_tracker = completion.GrouseTracker(Phat0, completion.GrouseParams(step=step, eta=eta))

#----------------------------------------Initialization : : simulator
my_simulator = simulator.Simulator(tracker = my_tracker,
                                   source = L,
                                   masks = mask)

#----------------------------------------Initialization : : logger
if os.path.basename( os.path.normpath( os.path.abspath(os.getcwd()) ) ) == 'presets':
    data_folder = '../simdata'
else:
    data_folder = 'simdata'

pathlib.Path(data_folder).mkdir(parents=True, exist_ok=True)

date = datetime.now().strftime("%Y-%m-%d")
time = datetime.now().strftime("%Hh%Mm%Ss")
datafile = data_folder + '/grouse__' + date + '__' + time + '.csv'

if is_log_data:
    print('Logging data to:    ' + datafile)

my_logger = loggers.LoggerGrouse()

#----------------------------------------Main loop
while my_simulator.sim_step():
    t, observation, info = my_simulator.get_sim_step_data()
    eps_t = principal_angle_stats(my_tracker.Phat, P)[0]
    row = (t, int(mask[:, t].sum()), eps_t, info.theta, info.mu_r)

    if t % print_every == 0:
        my_logger.print_sim_step(*row)

    if is_log_data:
        my_logger.log_data_row(datafile, *row)

print('Final error: {:.3e}'.format(principal_angle_stats(my_tracker.Phat, P)[0]))
