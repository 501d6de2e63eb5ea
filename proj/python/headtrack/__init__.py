"""Point tracking from video transformer attention heads.

Thin wrapper over the C++ core. Videos are uint8 arrays of shape (F, H, W, 3);
feature tensors come back as float32 arrays in the HTF1 layout.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401


def toy_case(calibration=None, model=None):
    """Render one calibration video and extract toy-model features for it.

    Returns (video, ground_truth, volume).
    """
    calibration = calibration or CalibrationSpec()  # noqa: F405
    model = model or ToyModelSpec()  # noqa: F405
    video, gt = generate_calibration(calibration)[0]  # noqa: F405
    volume = extract_features(video, init_toy_model(model))  # noqa: F405
    return video, gt, volume
