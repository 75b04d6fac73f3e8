#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains one single class that feeds frame streams to online trackers.
The stream can be of two types:

- a data matrix, one frame per column
- an iterator of frames, e.g. frames decoded from a binary pipe by :func:`~slrtrack.matio.iter_frames`

Remarks: 

- All vectors are treated as of type [n,]
- Frames are consumed strictly in order; a stream iterator is consumed once

"""

import numpy as np

from .exceptions import DimensionError
from .exceptions import PreconditionError


class Simulator:
    """
    Class for running online trackers over frame streams.

    Attributes
    ----------
    tracker : : object
        A tracker with ``process_frame`` and ``reset`` methods, e.g. :class:`~slrtrack.trackers.NorstTracker`.
        If it also has an ``initialize`` method, the first ``t_train`` frames are handed to it as a batch.
    source : : array of shape ``[n, tmax]`` or iterable of frames
    t_train : : integer
        Number of frames reserved for tracker initialization.
    masks : : boolean array of shape ``[n, tmax]`` or ``None``
        Observation masks for trackers with missing data; the tracker is then called as
        ``process_frame(frame, mask)``.

    """

    def __init__(self, tracker, source, t_train=0, masks=None):
        self.tracker = tracker
        self.source = source
        self.t_train = t_train
        self.masks = None if masks is None else np.asarray(masks, dtype=bool)
        if self.masks is not None and isinstance(source, np.ndarray) and self.masks.shape != source.shape:
            raise DimensionError(f"mask shape {self.masks.shape} differs from data shape {source.shape}")
        self._iter = None
        self._consumed = False
        self.reset()

    def _frames(self):
        if isinstance(self.source, np.ndarray):
            return (self.source[:, t] for t in range(self.source.shape[1]))
        if self._consumed:
            raise PreconditionError("a frame iterator cannot be replayed")
        self._consumed = True
        return iter(self.source)

    def _initialize(self):
        batch = []
        for _ in range(self.t_train):
            frame = next(self._iter, None)
            if frame is None:
                raise PreconditionError(f"stream ended after {len(batch)} of {self.t_train} initialization frames")
            batch.append(np.asarray(frame, dtype=float))
        if hasattr(self.tracker, "initialize"):
            self.tracker.initialize(np.column_stack(batch))
        self.t = self.t_train - 1
        self.initialized = True

    def sim_step(self):
        """
        Feed the next frame to the tracker and update the current data (time, frame and tracker output).

        Returns
        -------
        ``False`` at the end of the stream, ``True`` otherwise.

        """
        if not self.initialized:
            self._initialize()
        frame = next(self._iter, None)
        if frame is None:
            return False
        self.t += 1
        self.observation = np.asarray(frame, dtype=float)
        if self.masks is not None:
            self.output = self.tracker.process_frame(self.observation, self.masks[:, self.t])
        else:
            self.output = self.tracker.process_frame(self.observation)
        return True

    def get_sim_step_data(self):
        """
        Collect current data: frame index, frame and tracker output.

        """
        return self.t, self.observation, self.output

    def run(self, callback=None):
        """
        Step through the whole stream, calling ``callback(t, observation, output)`` after every frame.

        """
        while self.sim_step():
            if callback is not None:
                callback(*self.get_sim_step_data())

    def reset(self):
        self.tracker.reset()
        self._iter = self._frames()
        self.t = -1
        self.observation = None
        self.output = None
        self.initialized = self.t_train == 0
