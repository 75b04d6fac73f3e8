#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Preset: NORST tracking a piecewise-constant subspace with sparse outliers (Bernoulli or moving-object support).

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
import warnings
import csv
from datetime import datetime
import numpy as np

from slrtrack import simulator
from slrtrack import trackers
from slrtrack import loggers
from slrtrack import presets
from slrtrack import scenarios
from slrtrack.linalg import subspace_error
from slrtrack.utilities import rel_frob_err

import argparse

description = "Tracking preset: NORST on a synthetic piecewise-constant subspace with sparse outliers."

parser = argparse.ArgumentParser(description=description)

parser.add_argument('--outlier_model', type=str,
                    choices=['bernoulli',
                             'moving_object'],
                    default='bernoulli',
                    help='Outlier support model. Currently available: ' +
                    '----bernoulli: every entry is an outlier independently of all others; ' +
                    '----moving_object: a block of rows moving down and back up, large row fractions.')
parser.add_argument('--scale', type=str,
                    choices=['desk', 'full'],
                    default='desk',
                    help='Problem size: desk (n=200, tmax=3000, r=10) or full (n=1000, tmax=12000, r=30).')
parser.add_argument('--config', type=str,
                    default=None,
                    help='Scenario JSON file; overrides --outlier_model and --scale.')
parser.add_argument('--seed', type=int,
                    default=0,
                    help='Scenario seed.')
parser.add_argument('--noise_var', type=float,
                    default=0.0,
                    help='Variance of the dense Gaussian noise (desk scale only).')
parser.add_argument('--alpha', type=int,
                    default=None,
                    help='Frames per subspace-update window. Default: preset value.')
parser.add_argument('--eps', type=float,
                    default=0.01,
                    help='Target subspace error; sets the number of updates K = ceil(log(1/eps)).')
parser.add_argument('--xi_mode', type=str,
                    choices=['fixed', 'video'],
                    default='fixed',
                    help='Noise bound of the projected l1 step: fixed xmin/15 or the previous projected residual.')
parser.add_argument('--is_offline', type=bool,
                    default=False,
                    help='Flag to run the offline smoothing pass at the end.')
parser.add_argument('--is_log_data', type=bool,
                    default=False,
                    help='Flag to log data into a data file. Data are stored in simdata folder.')
parser.add_argument('--is_print_sim_step', type=bool,
                    default=False,
                    help='Flag to print per-frame data into terminal.')

args = parser.parse_args()

globals().update(vars(args))

#----------------------------------------Initialization : : scenario
if config is not None:
    my_scenario = scenarios.load_scenario(config).model_copy(update={'seed': seed})
elif scale == 'full':
    my_scenario = presets.full_bernoulli(seed) if outlier_model == 'bernoulli' else presets.full_moving_object(seed)
elif outlier_model == 'bernoulli':
    my_scenario = presets.desk_bernoulli(seed, noise_var=noise_var)
else:
    my_scenario = presets.desk_moving_object(seed, noise_var=noise_var)

truth = scenarios.assemble_scenario(my_scenario)

#----------------------------------------Initialization : : tracker
tracker_pars = dict(presets.FULL_NORST if scale == 'full' else presets.DESK_NORST)
tracker_pars.update(r=my_scenario.r, xmin=my_scenario.xmin, t_train=my_scenario.t_train, eps=eps, xi_mode=xi_mode)
if alpha is not None:
    tracker_pars['alpha'] = alpha

my_tracker = trackers.NorstTracker(trackers.NorstParams(**tracker_pars), keep_history=is_offline)

#----------------------------------------Initialization : : simulator
my_simulator = simulator.Simulator(tracker = my_tracker,
                                   source = truth.M,
                                   t_train = my_scenario.t_train)

#----------------------------------------Initialization : : logger
if os.path.basename( os.path.normpath( os.path.abspath(os.getcwd()) ) ) == 'presets':
    data_folder = '../simdata'
else:
    data_folder = 'simdata'

pathlib.Path(data_folder).mkdir(parents=True, exist_ok=True)

date = datetime.now().strftime("%Y-%m-%d")
time = datetime.now().strftime("%Hh%Mm%Ss")
datafile = data_folder + '/' + my_scenario.name + '__norst__' + date + '__' + time + '.csv'

if is_log_data:
    print('Logging data to:    ' + datafile)

    with open(datafile, 'w', newline='') as outfile:
        writer = csv.writer(outfile)
        writer.writerow(['Scenario', my_scenario.name ] )
        writer.writerow(['seed', str(seed) ] )
        writer.writerow(['eps', str(eps) ] )
        writer.writerow(['xi_mode', str(xi_mode) ] )
        writer.writerow(['t', '|T|', '||x||', 'residual', 'phase', 'k'] )

# Do not display fallback warnings when print is on
if is_print_sim_step:
    warnings.filterwarnings('ignore')

my_logger = loggers.LoggerNorst()

#----------------------------------------Main loop
Lhat = np.array(truth.M)
updates_seen = 0

while my_simulator.sim_step():
    t, observation, out = my_simulator.get_sim_step_data()
    Lhat[:, t] = out.lhat

    row = (t, out.That.size, float(np.linalg.norm(out.xhat)), out.residual, out.phase, out.k)

    if is_print_sim_step:
        my_logger.print_sim_step(*row)

    if is_log_data:
        my_logger.log_data_row(datafile, *row)

    log = my_tracker.state.update_log
    while updates_seen < len(log):
        t_update, basis = log[updates_seen]
        print(f"t = {t_update:6d}   update {updates_seen % my_tracker.params.K + 1}   " +
              f"SE = {subspace_error(basis, truth.basis_at(t_update)):.3e}")
        updates_seen += 1

Lhat[:, :my_scenario.t_train] = my_tracker.init_lowrank
print('True change times:     ', truth.change_times)
print('Detected change times: ', my_tracker.state.t_hat)
print('Relative error (online):  {:.3e}'.format(rel_frob_err(Lhat, truth.L)))

if is_offline:
    Lhat_offline, _ = my_tracker.offline()
    print('Relative error (offline): {:.3e}'.format(rel_frob_err(Lhat_offline, truth.L)))
