import numpy as np

from stereokit.distill import StereoSample


def random_stereo(rng, h=16, w=16, max_disp=4.0):
    """Random stereo sample plus competing 'matted' disparities for both views."""
    sample = StereoSample(
        rng.random((h, w, 3)),
        rng.random((h, w, 3)),
        rng.uniform(0, max_disp, (h, w)),
        rng.uniform(0, max_disp, (h, w)),
    )
    matted_l = np.clip(sample.disp_left + rng.uniform(-1.5, 1.5, (h, w)), 0, None)
    matted_r = np.clip(sample.disp_right + rng.uniform(-1.5, 1.5, (h, w)), 0, None)
    return sample, matted_l, matted_r
