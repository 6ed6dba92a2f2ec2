import numpy as np
import pandas as pd

from models.errors import NowcastError


def trend_smooth(values, window: int = 7) -> np.ndarray:
    """
    Centered moving average. Near the ends the window is truncated to the
    periods that exist, so the output has the same length as the input.
    """
    values = np.asarray(values, dtype=float)
    if window < 1 or window % 2 == 0:
        raise NowcastError(f"smoothing window must be a positive odd integer, got {window}")
    if window > len(values):
        raise NowcastError(f"smoothing window {window} is longer than the series ({len(values)})")
    if window == 1:
        return values.copy()
    rolled = pd.Series(values).rolling(window=window, center=True, min_periods=1).mean()
    return rolled.to_numpy()
