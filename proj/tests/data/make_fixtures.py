# Copyright 2026 The slidekit Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the raster fixtures in this directory."""

import pathlib

import cv2
import numpy as np

HERE = pathlib.Path(__file__).parent


def main() -> None:
    rng = np.random.default_rng(20240917)
    img = np.full((512, 768, 3), 255, np.uint8)
    yy, xx = np.mgrid[0:512, 0:768]
    for cx, cy, rx, ry in [(180, 160, 150, 120), (520, 330, 200, 140), (300, 420, 90, 70)]:
        inside = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        noise = rng.integers(-20, 21, size=inside.sum())
        img[inside, 0] = np.clip(170 + noise, 0, 255)  # B
        img[inside, 1] = np.clip(110 + noise, 0, 255)  # G
        img[inside, 2] = np.clip(200 + noise, 0, 255)  # R
    cv2.imwrite(str(HERE / "fixture_slide.png"), img)

    half = np.full((64, 64), 255, np.uint8)
    half[:, :32] = 0
    cv2.imwrite(str(HERE / "half_black.png"), half)


if __name__ == "__main__":
    main()
