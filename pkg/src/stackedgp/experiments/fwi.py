"""Canadian fire-weather index equations (one-day update).

Standard FFMC/DMC/DC/ISI calculations from daily noon weather: air
temperature (C), relative humidity (%), wind speed (km/h), and 24-h rain
(mm). Used as the truth model to generate the weather-to-index training
data for the forest-fire network; previous-day moisture codes default to
the conventional start-up values.
"""

from __future__ import annotations

import numpy as np

from ..gp import TrainingSet
from ..seeding import rng as derived_rng

FFMC_START = 85.0
DMC_START = 6.0
DC_START = 15.0

# month factors (day length for DMC, day-length adjustment for DC)
DAY_LENGTH_DMC = [6.5, 7.5, 9.0, 12.8, 13.9, 13.9, 12.4, 10.9, 9.4, 8.0, 7.0, 6.0]
DAY_LENGTH_DC = [-1.6, -1.6, -1.6, 0.9, 3.8, 5.8, 6.4, 5.0, 2.4, 0.4, -1.6, -1.6]


def ffmc(temp: float, rh: float, wind: float, rain: float, prev: float = FFMC_START) -> float:
    """Fine fuel moisture code after one day."""
    rh = min(rh, 100.0)
    m = 147.2 * (101.0 - prev) / (59.5 + prev)
    if rain > 0.5:
        rf = rain - 0.5
        extra = 0.0
        if m > 150.0:
            extra = 0.0015 * (m - 150.0) ** 2 * np.sqrt(rf)
        m = m + 42.5 * rf * np.exp(-100.0 / (251.0 - m)) * (1.0 - np.exp(-6.93 / rf)) + extra
        m = min(m, 250.0)
    ed = (
        0.942 * rh**0.679
        + 11.0 * np.exp((rh - 100.0) / 10.0)
        + 0.18 * (21.1 - temp) * (1.0 - np.exp(-0.115 * rh))
    )
    if m > ed:
        ko = 0.424 * (1.0 - (rh / 100.0) ** 1.7) + 0.0694 * np.sqrt(wind) * (
            1.0 - (rh / 100.0) ** 8
        )
        kd = ko * 0.581 * np.exp(0.0365 * temp)
        m = ed + (m - ed) * 10.0 ** (-kd)
    else:
        ew = (
            0.618 * rh**0.753
            + 10.0 * np.exp((rh - 100.0) / 10.0)
            + 0.18 * (21.1 - temp) * (1.0 - np.exp(-0.115 * rh))
        )
        if m < ew:
            k1 = 0.424 * (1.0 - ((100.0 - rh) / 100.0) ** 1.7) + 0.0694 * np.sqrt(
                wind
            ) * (1.0 - ((100.0 - rh) / 100.0) ** 8)
            kw = k1 * 0.581 * np.exp(0.0365 * temp)
            m = ew - (ew - m) * 10.0 ** (-kw)
    return 59.5 * (250.0 - m) / (147.2 + m)


def dmc(temp: float, rh: float, rain: float, prev: float = DMC_START, month: int = 8) -> float:
    """Duff moisture code after one day."""
    po = prev
    if rain > 1.5:
        re = 0.92 * rain - 1.27
        mo = 20.0 + np.exp(5.6348 - prev / 43.43)
        if prev <= 33.0:
            b = 100.0 / (0.5 + 0.3 * prev)
        elif prev <= 65.0:
            b = 14.0 - 1.3 * np.log(prev)
        else:
            b = 6.2 * np.log(prev) - 17.2
        mr = mo + 1000.0 * re / (48.77 + b * re)
        po = max(244.72 - 43.43 * np.log(mr - 20.0), 0.0)
    t = max(temp, -1.1)
    k = 1.894 * (t + 1.1) * (100.0 - rh) * DAY_LENGTH_DMC[month - 1] * 1e-6
    return po + 100.0 * k


def dc(temp: float, rain: float, prev: float = DC_START, month: int = 8) -> float:
    """Drought code after one day."""
    do = prev
    if rain > 2.8:
        rd = 0.83 * rain - 1.27
        qo = 800.0 * np.exp(-prev / 400.0)
        qr = qo + 3.937 * rd
        do = max(400.0 * np.log(800.0 / qr), 0.0)
    t = max(temp, -2.8)
    v = max(0.36 * (t + 2.8) + DAY_LENGTH_DC[month - 1], 0.0)
    return do + 0.5 * v


def isi(wind: float, ffmc_value: float) -> float:
    """Initial spread index from wind and today's FFMC."""
    m = 147.2 * (101.0 - ffmc_value) / (59.5 + ffmc_value)
    fw = np.exp(0.05039 * wind)
    ff = 91.9 * np.exp(-0.1386 * m) * (1.0 + m**5.31 / 4.93e7)
    return 0.208 * fw * ff


def sample_weather(n: int, seed: int = 0) -> dict[str, np.ndarray]:
    """Plausible daily noon weather draws (dry days dominate)."""
    gen = derived_rng(seed, "fwi-weather")
    temp = gen.uniform(2.0, 35.0, n)
    rh = gen.uniform(15.0, 100.0, n)
    wind = gen.uniform(0.0, 40.0, n)
    rain = np.where(gen.uniform(size=n) < 0.7, 0.0, gen.exponential(4.0, n))
    return {"temp": temp, "RH": rh, "wind": wind, "rain": rain}


def generate_index_datasets(n: int = 400, seed: int = 0, month: int = 8) -> dict[str, TrainingSet]:
    """Weather-to-index training sets for the four index nodes."""
    w = sample_weather(n, seed)
    f = np.array([ffmc(t, h, s, r) for t, h, s, r in zip(w["temp"], w["RH"], w["wind"], w["rain"])])
    d = np.array([dmc(t, h, r, month=month) for t, h, r in zip(w["temp"], w["RH"], w["rain"])])
    c = np.array([dc(t, r, month=month) for t, r in zip(w["temp"], w["rain"])])
    s = np.array([isi(v, fv) for v, fv in zip(w["wind"], f)])
    return {
        "ffmc": TrainingSet(np.column_stack([w["temp"], w["RH"], w["wind"], w["rain"]]), f),
        "dmc": TrainingSet(np.column_stack([w["temp"], w["RH"], w["rain"]]), d),
        "dc": TrainingSet(np.column_stack([w["temp"], w["rain"]]), c),
        "isi": TrainingSet(np.column_stack([w["wind"], f]), s),
    }
