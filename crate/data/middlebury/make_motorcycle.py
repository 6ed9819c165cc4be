"""Regenerates data/middlebury/motorcycle/{color.png,truth.pgm}.

Source: the Middlebury 2014 Motorcycle pair as bundled with scikit-image
(skimage.data.stereo_motorcycle, left view and its disparity map).
"""

import pathlib

import numpy as np
from PIL import Image
from skimage import data

Y0, X0, H, W = 90, 140, 376, 448


def fill_invalid(disp):
    """Applied to the crop. Each invalid pixel takes the smaller of the nearest valid values to its
    left and right on the same row (the background side of an occlusion)."""
    out = disp.copy()
    for row in out:
        valid = np.isfinite(row)
        idx = np.arange(row.size)
        left = np.where(valid, idx, -1)
        left = np.maximum.accumulate(left)
        right = np.where(valid, idx, row.size)
        right = np.minimum.accumulate(right[::-1])[::-1]
        for i in np.flatnonzero(~valid):
            cands = [row[j] for j in (left[i], right[i]) if 0 <= j < row.size]
            row[i] = min(cands)
    return out


def main():
    left, _, disp = data.stereo_motorcycle()
    color = left[Y0 : Y0 + H, X0 : X0 + W]
    disp = fill_invalid(disp.astype(np.float64)[Y0 : Y0 + H, X0 : X0 + W])
    truth = np.clip(np.round(4.0 * disp), 0, 255).astype(np.uint8)

    out = pathlib.Path(__file__).parent / "motorcycle"
    out.mkdir(exist_ok=True)
    Image.fromarray(color).save(out / "color.png")
    with open(out / "truth.pgm", "wb") as f:
        f.write(f"P5\n{W} {H}\n255\n".encode())
        f.write(truth.tobytes())


if __name__ == "__main__":
    main()
