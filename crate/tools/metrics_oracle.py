#!/usr/bin/env python3
"""Straight numpy reference for PSNR, SSIM, IQI and FSIM on MRAW images.

Written independently of the Rust crate and used to produce the golden
values under crates/cli/tests/fixtures. Loops over windows directly
instead of using integral images or separable filters.

usage: metrics_oracle.py PRED_DIR PRED_TAG TARGET_DIR TARGET_TAG > golden.csv
       metrics_oracle.py --fsim A.mraw B.mraw
"""
import struct
import sys
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d


def read_mraw(path):
    raw = Path(path).read_bytes()
    assert raw[:4] == b"MRAW", path
    h, w = struct.unpack("<II", raw[4:12])
    data = np.frombuffer(raw[12:], dtype="<f4")
    assert data.size == h * w, path
    return data.astype(np.float64).reshape(h, w)


def psnr(x, y):
    mse = np.mean((x - y) ** 2)
    return float("inf") if mse == 0 else 10 * np.log10(1.0 / mse)


def ssim(x, y, win=11, sigma=1.5, k1=0.01, k2=0.03):
    ax = np.arange(win) - win // 2
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * sigma**2))
    g /= g.sum()
    c1, c2 = k1**2, k2**2
    h, w = x.shape
    vals = []
    for i in range(h - win + 1):
        for j in range(w - win + 1):
            a, b = x[i:i + win, j:j + win], y[i:i + win, j:j + win]
            ma, mb = (g * a).sum(), (g * b).sum()
            va = (g * (a - ma) ** 2).sum()
            vb = (g * (b - mb) ** 2).sum()
            cov = (g * (a - ma) * (b - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def iqi(x, y, win=8, eps=1e-12):
    h, w = x.shape
    vals = []
    for i in range(h - win + 1):
        for j in range(w - win + 1):
            a, b = x[i:i + win, j:j + win], y[i:i + win, j:j + win]
            ma, mb = a.mean(), b.mean()
            va, vb = ((a - ma) ** 2).mean(), ((b - mb) ** 2).mean()
            cov = ((a - ma) * (b - mb)).mean()
            q = (2 * cov + eps) / (va + vb + eps) * (2 * ma * mb + eps) / (ma**2 + mb**2 + eps)
            vals.append(min(1.0, max(-1.0, q)))
    return float(np.mean(vals))


def phasecong(im, nscale=4, norient=4, minwavelength=6, mult=2, sigma_onf=0.55,
              d_theta_on_sigma=1.2, k=2.0, epsilon=1e-4):
    rows, cols = im.shape
    imagefft = np.fft.fft2(im)
    xr = (np.arange(cols) - cols // 2) / cols
    yr = (np.arange(rows) - rows // 2) / rows
    x, y = np.meshgrid(xr, yr)
    radius = np.sqrt(x**2 + y**2)
    theta = np.arctan2(-y, x)
    radius = np.fft.ifftshift(radius)
    theta = np.fft.ifftshift(theta)
    lowpass = 1.0 / (1.0 + (radius / 0.45) ** 30)
    radius[0, 0] = 1
    sintheta, costheta = np.sin(theta), np.cos(theta)
    theta_sigma = np.pi / norient / d_theta_on_sigma

    log_gabor = []
    for s in range(nscale):
        fo = 1.0 / (minwavelength * mult**s)
        lg = np.exp(-(np.log(radius / fo)) ** 2 / (2 * np.log(sigma_onf) ** 2)) * lowpass
        lg[0, 0] = 0
        log_gabor.append(lg)

    energy_all = np.zeros((rows, cols))
    an_all = np.zeros((rows, cols))
    for o in range(norient):
        angl = o * np.pi / norient
        ds = sintheta * np.cos(angl) - costheta * np.sin(angl)
        dc = costheta * np.cos(angl) + sintheta * np.sin(angl)
        dtheta = np.abs(np.arctan2(ds, dc))
        spread = np.exp(-dtheta**2 / (2 * theta_sigma**2))
        sum_e = np.zeros((rows, cols))
        sum_o = np.zeros((rows, cols))
        sum_an = np.zeros((rows, cols))
        eo = []
        ifft_filters = []
        for s in range(nscale):
            filt = log_gabor[s] * spread
            ifft_filters.append(np.real(np.fft.ifft2(filt)) * np.sqrt(rows * cols))
            r = np.fft.ifft2(imagefft * filt)
            eo.append(r)
            sum_an += np.abs(r)
            sum_e += np.real(r)
            sum_o += np.imag(r)
            if s == 0:
                em_n = np.sum(filt**2)
        x_energy = np.sqrt(sum_e**2 + sum_o**2) + epsilon
        mean_e, mean_o = sum_e / x_energy, sum_o / x_energy
        energy = np.zeros((rows, cols))
        for r in eo:
            e, od = np.real(r), np.imag(r)
            energy += e * mean_e + od * mean_o - np.abs(e * mean_o - od * mean_e)
        median_e2n = np.median(np.abs(eo[0]) ** 2)
        noise_power = -median_e2n / np.log(0.5) / em_n
        est_sum_an2 = sum(np.sum(f**2) for f in ifft_filters)
        est_sum_ai_aj = 0.0
        for si in range(nscale - 1):
            for sj in range(si + 1, nscale):
                est_sum_ai_aj += np.sum(ifft_filters[si] * ifft_filters[sj])
        est_noise_energy2 = 2 * noise_power * est_sum_an2 + 4 * noise_power * est_sum_ai_aj
        tau = np.sqrt(est_noise_energy2 / 2)
        est_noise_energy = tau * np.sqrt(np.pi / 2)
        est_noise_sigma = np.sqrt((2 - np.pi / 2) * tau**2)
        t = (est_noise_energy + k * est_noise_sigma) / 1.7
        energy_all += np.maximum(energy - t, 0)
        an_all += sum_an
    return np.clip(energy_all / (an_all + epsilon), 0, 1)


def fsim(x, y, t1=0.85, t2=160.0):
    a, b = x * 255.0, y * 255.0
    pc1, pc2 = phasecong(a), phasecong(b)
    dx = np.array([[3, 0, -3], [10, 0, -10], [3, 0, -3]]) / 16.0
    dy = dx.T
    g1 = np.sqrt(convolve2d(a, dx, mode="same") ** 2 + convolve2d(a, dy, mode="same") ** 2)
    g2 = np.sqrt(convolve2d(b, dx, mode="same") ** 2 + convolve2d(b, dy, mode="same") ** 2)
    s_pc = (2 * pc1 * pc2 + t1) / (pc1**2 + pc2**2 + t1)
    s_g = (2 * g1 * g2 + t2) / (g1**2 + g2**2 + t2)
    pcm = np.maximum(pc1, pc2)
    if pcm.sum() == 0:
        return float(np.mean(s_pc * s_g))
    return float(np.sum(s_pc * s_g * pcm) / np.sum(pcm))


def fmt(v):
    return "inf" if v == float("inf") else "%.6f" % v


def by_stem(d, tag):
    out = {}
    for p in sorted(Path(d).glob("*.%s.mraw" % tag)):
        out[p.name[: -len(".%s.mraw" % tag)]] = p
    return out


def main(argv):
    if argv[0] == "--fsim":
        print(repr(fsim(read_mraw(argv[1]), read_mraw(argv[2]))))
        return
    pred, target = by_stem(argv[0], argv[1]), by_stem(argv[2], argv[3])
    rows = []
    for stem in sorted(set(pred) & set(target)):
        x, y = read_mraw(pred[stem]), read_mraw(target[stem])
        rows.append((stem, psnr(x, y), ssim(x, y), iqi(x, y), fsim(x, y)))
    out = ["pair_id,psnr_db,ssim,iqi,fsim"]
    for r in rows:
        out.append(",".join([r[0]] + [fmt(v) for v in r[1:]]))
    med = [float(np.median([r[i] for r in rows])) for i in range(1, 5)]
    out.append(",".join(["MEDIAN"] + [fmt(v) for v in med]))
    sys.stdout.write("\n".join(out) + "\n")


if __name__ == "__main__":
    main(sys.argv[1:])
