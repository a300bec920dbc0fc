"""Independent reference implementations used as test oracles.

Deliberately naive (nested loops, dense rasters, python sets) and kept
free of any code path they are checking.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def conv2d_direct(x: np.ndarray, kernel: np.ndarray,
                  bias: np.ndarray) -> np.ndarray:
    """3x3 stride-1 zero-pad-1 convolution via explicit summation."""
    h, w, cin = x.shape
    cout = kernel.shape[3]
    out = np.zeros((h, w, cout))
    for i in range(h):
        for j in range(w):
            for o in range(cout):
                acc = bias[o]
                for u in range(3):
                    for v in range(3):
                        ii, jj = i + u - 1, j + v - 1
                        if 0 <= ii < h and 0 <= jj < w:
                            for c in range(cin):
                                acc += x[ii, jj, c] * kernel[u, v, c, o]
                out[i, j, o] = acc
    return out


def group_mean_direct(x: np.ndarray) -> np.ndarray:
    """Per-element arithmetic mean over the leading axis."""
    out = np.zeros(x.shape[1:])
    for i in range(x.shape[0]):
        out += x[i]
    return out / x.shape[0]


def upsample_direct(x: np.ndarray, f: int) -> np.ndarray:
    """Index-mapping replication oracle."""
    h, w, c = x.shape
    out = np.zeros((h * f, w * f, c))
    for i in range(h * f):
        for j in range(w * f):
            out[i, j] = x[i // f, j // f]
    return out


def normalize_direct(x: np.ndarray, eps: float) -> np.ndarray:
    out = np.zeros_like(x)
    for c in range(x.shape[2]):
        vals = x[:, :, c]
        mu = vals.mean()
        var = ((vals - mu) ** 2).mean()
        out[:, :, c] = (vals - mu) / np.sqrt(var + eps)
    return out


def containment_counts(boxes, canvas, categories) -> np.ndarray:
    """Per-pixel point-in-box counting; boxes are (x, y, h, w, category)."""
    h, w = canvas
    out = np.zeros((h, w, len(categories)), dtype=int)
    chan = {cid: k for k, cid in enumerate(categories)}
    for i in range(h):
        for j in range(w):
            for (bx, by, bh, bw, cat) in boxes:
                if by <= i < by + bh and bx <= j < bx + bw:
                    out[i, j, chan[cat]] += 1
    return out


def bbox_from_pixels(pixels) -> tuple[int, int, int, int]:
    """(x, y, h, w) via min/max scan over (row, col) pairs."""
    rows = [r for r, _ in pixels]
    cols = [c for _, c in pixels]
    return (min(cols), min(rows),
            max(rows) - min(rows) + 1, max(cols) - min(cols) + 1)


def flood_fill_components(mask: np.ndarray) -> list[set]:
    """4-connected components by BFS."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    components = []
    for i in range(h):
        for j in range(w):
            if not mask[i, j] or seen[i, j]:
                continue
            queue = [(i, j)]
            seen[i, j] = True
            comp = set()
            while queue:
                r, c = queue.pop()
                comp.add((r, c))
                for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] \
                            and not seen[rr, cc]:
                        seen[rr, cc] = True
                        queue.append((rr, cc))
            components.append(comp)
    return components


def nearest_background_assignment(index_map: np.ndarray,
                                  background_ids) -> np.ndarray:
    """Brute-force reassignment: per foreground pixel, scan every
    background pixel for the minimum (squared distance, category id)."""
    h, w = index_map.shape
    bg = set(int(b) for b in background_ids)
    bg_pixels = [(r, c, int(index_map[r, c]))
                 for r in range(h) for c in range(w)
                 if int(index_map[r, c]) in bg]
    out = index_map.copy()
    for r in range(h):
        for c in range(w):
            if int(index_map[r, c]) in bg:
                continue
            best = None
            for (br, bc, bcat) in bg_pixels:
                d2 = (br - r) ** 2 + (bc - c) ** 2
                key = (d2, bcat)
                if best is None or key < best:
                    best = key
            out[r, c] = best[1]
    return out


def dense_iou(query_masks: dict[int, np.ndarray],
              entry_masks: dict[int, np.ndarray]) -> Fraction:
    """Pooled-IoU via dense per-pixel counting over all categories."""
    inter = 0
    union = 0
    for cid in set(query_masks) | set(entry_masks):
        q = query_masks.get(cid)
        e = entry_masks.get(cid)
        if q is None:
            union += int(e.sum())
        elif e is None:
            union += int(q.sum())
        else:
            inter += int((q & e).sum())
            union += int((q | e).sum())
    return Fraction(inter, union) if union else Fraction(0)


def full_sort_ranking(scores: list[Fraction], m: int) -> list[int]:
    """Indices of the m best scores, ties broken by earlier index."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order[:m]


def fusion_unrolled(query: np.ndarray, retrieved: list[np.ndarray],
                    f_kernel, f_bias, m_kernel, m_bias, steps: int
                    ) -> np.ndarray:
    """Stepwise reference: encode with conv+relu, average pooled retrieved
    encodings plus the query encoding, then residual refinement."""
    def enc(x):
        return np.maximum(conv2d_direct(x, f_kernel, f_bias), 0.0)

    pooled = group_mean_direct(np.stack([enc(r) for r in retrieved]))
    m_t = enc(query) + pooled
    for _ in range(steps):
        m_t = m_t + np.maximum(conv2d_direct(m_t, m_kernel, m_bias), 0.0)
    return m_t


def spade_unrolled(h: np.ndarray, cond: np.ndarray, gamma_kernel, gamma_bias,
                   beta_kernel, beta_bias, eps: float) -> np.ndarray:
    normalized = normalize_direct(h, eps)
    gamma = conv2d_direct(cond, gamma_kernel, gamma_bias)
    beta = conv2d_direct(cond, beta_kernel, beta_bias)
    return normalized * gamma + beta


def gan_terms_direct(real_maps, fake_maps, retrieved_maps=None):
    """Per-pixel summation of the objective terms (python loops)."""
    def mean_log(maps, transform):
        per_scale = []
        for m in maps:
            total, n = 0.0, 0
            for v in np.asarray(m).ravel():
                total += np.log(transform(v))
                n += 1
            per_scale.append(total / n)
        return sum(per_scale) / len(per_scale)

    real = mean_log(real_maps, lambda v: v)
    fake = mean_log(fake_maps, lambda v: 1.0 - v)
    terms = {"log_d_real": real, "log_one_minus_d_fake": fake}
    disc = real + fake
    if retrieved_maps is not None:
        retrieved = mean_log(retrieved_maps, lambda v: v)
        terms["log_d_retrieved"] = retrieved
        disc += retrieved
    return disc, fake, terms
