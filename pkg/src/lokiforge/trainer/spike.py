import math
from collections import deque

import numpy as np


def detect_spike(history, loss, window=100, sigma=4.0, floor=0.5):
    """Spike verdict for ``loss`` given the trailing ``history``.

    Non-finite losses are always spikes. Until the history holds ``window / 2``
    entries the verdict is False. Otherwise the threshold is
    ``mean + max(sigma * std, floor)``.
    """
    if not math.isfinite(loss):
        return True
    hist = list(history)[-window:]
    if len(hist) < window / 2:
        return False
    arr = np.asarray(hist, dtype=np.float64)
    mu = float(arr.mean())
    sd = float(arr.std())
    return loss > mu + max(sigma * sd, floor)


class SpikeDetector:
    def __init__(self, window=100, sigma=4.0, floor=0.5, history=()):
        self.window, self.sigma, self.floor = window, sigma, floor
        self.buffer = deque(history, maxlen=window)

    def check(self, loss):
        return detect_spike(self.buffer, loss, self.window, self.sigma, self.floor)

    def push(self, loss):
        self.buffer.append(float(loss))

    def clear(self):
        self.buffer.clear()

    def threshold(self):
        if len(self.buffer) < self.window / 2:
            return math.inf
        arr = np.asarray(self.buffer, dtype=np.float64)
        return float(arr.mean()) + max(self.sigma * float(arr.std()), self.floor)
