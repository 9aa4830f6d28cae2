#!/usr/bin/env python3
"""Regenerate problems/solar_system_sample.json.

The sample is an approximate nine-body barycentric state (Sun, Mercury,
Venus, Earth-Moon barycenter, Mars, Jupiter, Saturn, Neptune, Uranus) at
JD 2440400.5 TDB, built from mean Keplerian elements and standard GM
values (au^3/day^2). It demonstrates the gm-based problem schema and gives
the CLI a realistic smooth system; it is NOT an ephemeris. For runs that
should match a specific ephemeris, export barycentric positions (au) and
velocities (au/day) for the same epoch from your ephemeris service into
the same JSON layout: each body carries {"label", "gm", "q", "v"}, the
file-level "g" holds the Sun's GM so derived masses come out in solar
masses, and "t_span" is [0, horizon_in_days].
"""

import json
import math

# Mean Keplerian elements (J2000 ecliptic) and per-century rates:
# a [au], e, I [deg], L [deg], varpi [deg], Omega [deg].
ELEM = {
    "mercury": [(0.38709927, 0.20563593, 7.00497902, 252.25032350, 77.45779628, 48.33076593),
                (0.00000037, 0.00001906, -0.00594749, 149472.67411175, 0.16047689, -0.12534081)],
    "venus": [(0.72333566, 0.00677672, 3.39467605, 181.97909950, 131.60246718, 76.67984255),
              (0.00000390, -0.00004107, -0.00078890, 58517.81538729, 0.00268329, -0.27769418)],
    "emb": [(1.00000261, 0.01671123, -0.00001531, 100.46457166, 102.93768193, 0.0),
            (0.00000562, -0.00004392, -0.01294668, 35999.37244981, 0.32327364, 0.0)],
    "mars": [(1.52371034, 0.09339410, 1.84969142, -4.55343205, -23.94362959, 49.55953891),
             (0.00001847, 0.00007882, -0.00813131, 19140.30268499, 0.44441088, -0.29257343)],
    "jupiter": [(5.20288700, 0.04838624, 1.30439695, 34.39644051, 14.72847983, 100.47390909),
                (-0.00011607, -0.00013253, -0.00183714, 3034.74612775, 0.21252668, 0.20469106)],
    "saturn": [(9.53667594, 0.05386179, 2.48599187, 49.95424423, 92.59887831, 113.66242448),
               (-0.00125060, -0.00050991, 0.00193609, 1222.49362201, -0.41897216, -0.28867794)],
    "neptune": [(30.06992276, 0.00859048, 1.77004347, -55.12002969, 44.96476227, 131.78422574),
                (0.00026291, 0.00005105, 0.00035372, 218.45945325, -0.32241464, -0.00508664)],
    "uranus": [(19.18916464, 0.04725744, 0.77263783, 313.23810451, 170.95427630, 74.01692503),
               (-0.00196176, -0.00004397, -0.00242939, 428.48202785, 0.40805281, 0.04240589)],
}

# Gravitational parameters, au^3/day^2.
GM = {
    "sun": 2.9591220828559093e-04,
    "mercury": 4.91248045036476e-11,
    "venus": 7.24345233264412e-10,
    "emb": 8.997011346712499e-10,
    "mars": 9.54954869555077e-11,
    "jupiter": 2.82534584083387e-07,
    "saturn": 8.45970607324503e-08,
    "neptune": 1.52435734788511e-08,
    "uranus": 1.29202482578296e-08,
}

JD = 2440400.5


def state(name):
    (a0, e0, i0, l0, w0, o0), (da, de, di, dl, dw, do) = ELEM[name]
    t = (JD - 2451545.0) / 36525.0
    a = a0 + da * t
    e = e0 + de * t
    inc = math.radians(i0 + di * t)
    mean_lon = math.radians(l0 + dl * t)
    varpi = math.radians(w0 + dw * t)
    node = math.radians(o0 + do * t)
    arg_peri = varpi - node
    mean_anom = (mean_lon - varpi) % (2 * math.pi)
    ecc_anom = mean_anom
    for _ in range(60):
        ecc_anom -= (ecc_anom - e * math.sin(ecc_anom) - mean_anom) / (1 - e * math.cos(ecc_anom))
    mu = GM["sun"] + GM[name]
    n = math.sqrt(mu / a**3)
    ce, se = math.cos(ecc_anom), math.sin(ecc_anom)
    xp = a * (ce - e)
    yp = a * math.sqrt(1 - e * e) * se
    vxp = -a * n * se / (1 - e * ce)
    vyp = a * n * math.sqrt(1 - e * e) * ce / (1 - e * ce)
    cw, sw = math.cos(arg_peri), math.sin(arg_peri)
    co, so = math.cos(node), math.sin(node)
    ci, si = math.cos(inc), math.sin(inc)

    def rot(x, y):
        x1 = cw * x - sw * y
        y1 = sw * x + cw * y
        return (co * x1 - so * ci * y1, so * x1 + co * ci * y1, si * y1)

    return rot(xp, yp), rot(vxp, vyp)


def main():
    names = ["sun", "mercury", "venus", "emb", "mars", "jupiter", "saturn", "neptune", "uranus"]
    qs = {"sun": (0.0, 0.0, 0.0)}
    vs = {"sun": (0.0, 0.0, 0.0)}
    for nm in names[1:]:
        qs[nm], vs[nm] = state(nm)
    m_total = sum(GM[n] for n in names)
    qb = [sum(GM[n] * qs[n][k] for n in names) / m_total for k in range(3)]
    vb = [sum(GM[n] * vs[n][k] for n in names) / m_total for k in range(3)]
    bodies = [
        {
            "label": nm,
            "gm": GM[nm],
            "q": [qs[nm][k] - qb[k] for k in range(3)],
            "v": [vs[nm][k] - vb[k] for k in range(3)],
        }
        for nm in names
    ]
    problem = {
        "name": "solar-system sample (approximate mean-element state, JD 2440400.5 TDB)",
        "g": GM["sun"],
        "bodies": bodies,
        "t_span": [0.0, 2000.0],
        "units": "au, au/day; G chosen so masses are in solar masses",
    }
    with open("problems/solar_system_sample.json", "w") as f:
        json.dump(problem, f, indent=2)
        f.write("\n")
    print("wrote problems/solar_system_sample.json")


if __name__ == "__main__":
    main()
