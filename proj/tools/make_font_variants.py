#!/usr/bin/env python3
"""Derive a pool of distinct TTF files from the fonts installed on the system.

Test and demo runs need pools of 50-100 distinct fonts, far more than a bare
container ships. This script applies affine variations (condense, extend,
slant) to the glyph outlines of every usable base font and writes the results
to a target directory.
"""

import argparse
import os
import sys

from fontTools.ttLib import TTFont

LATIN = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"

# (x_scale, y_scale, shear)
VARIANTS = [
    (1.00, 1.00, 0.00),
    (0.78, 1.00, 0.00),
    (1.25, 1.00, 0.00),
    (1.00, 1.00, 0.22),
    (1.00, 1.00, -0.22),
    (0.85, 1.00, 0.12),
]


def base_font_paths():
    dirs = ["/usr/share/fonts/truetype/dejavu"]
    try:
        import matplotlib

        dirs.append(
            os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "fonts", "ttf")
        )
    except ImportError:
        pass
    paths = []
    for d in dirs:
        if not os.path.isdir(d):
            continue
        for name in sorted(os.listdir(d)):
            if name.lower().endswith(".ttf"):
                paths.append(os.path.join(d, name))
    # de-duplicate by filename (dejavu appears in both directories)
    seen = set()
    unique = []
    for p in paths:
        name = os.path.basename(p)
        if name not in seen:
            seen.add(name)
            unique.append(p)
    return unique


def covers_latin(font):
    try:
        cmap = font.getBestCmap()
    except Exception:
        return False
    return all(ord(c) in cmap for c in LATIN)


def transform_font(font, sx, sy, shear):
    glyf = font["glyf"]
    for name in glyf.keys():
        glyph = glyf[name]
        if glyph.isComposite():
            for comp in glyph.components:
                x, y = comp.x, comp.y
                comp.x = int(round(sx * x + shear * y))
                comp.y = int(round(sy * y))
        elif glyph.numberOfContours > 0:
            coords = glyph.coordinates
            for i, (x, y) in enumerate(coords):
                coords[i] = (int(round(sx * x + shear * y)), int(round(sy * y)))
    hmtx = font["hmtx"]
    for name in hmtx.metrics:
        advance, lsb = hmtx.metrics[name]
        hmtx.metrics[name] = (int(round(advance * sx)), int(round(lsb * sx)))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--count", type=int, default=120)
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    written = 0
    for path in base_font_paths():
        if written >= args.count:
            break
        try:
            probe = TTFont(path)
        except Exception:
            continue
        if "glyf" not in probe or not covers_latin(probe):
            continue
        stem = os.path.splitext(os.path.basename(path))[0]
        for k, (sx, sy, shear) in enumerate(VARIANTS):
            if written >= args.count:
                break
            out_path = os.path.join(args.out, f"{stem}__v{k}.ttf")
            if os.path.exists(out_path):
                written += 1
                continue
            try:
                font = TTFont(path)
                transform_font(font, sx, sy, shear)
                font.save(out_path)
                written += 1
            except Exception as exc:
                print(f"skip {stem} v{k}: {exc}", file=sys.stderr)
    print(f"wrote {written} fonts to {args.out}")
    if written == 0:
        sys.exit(1)


if __name__ == "__main__":
    main()
