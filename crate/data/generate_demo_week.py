"""Regenerates demo_week_synthetic.csv: one synthetic week of hourly wind and
day-ahead market data. Not measured data.

Usage: python3 generate_demo_week.py [seed] > demo_week_synthetic.csv
"""
import numpy as np, csv, sys
seed = int(sys.argv[1]) if len(sys.argv)>1 else 20240412
rng = np.random.default_rng(seed)
T = 168
rows = []
w = 0.3
for t in range(T):
    h = t % 24
    diurnal = 0.30 + 0.15*np.cos(2*np.pi*(h-3)/24)
    synoptic = 0.12*np.sin(2*np.pi*t/60 + 0.5)
    w = 0.7*w + 0.3*(diurnal+synoptic) + rng.normal(0, 0.06)
    w = min(max(w, 0.0), 1.0)
    hsl = round(70*w**1.8, 1)
    lsl = round(0.1*hsl, 1)
    base = 36 + 25*np.exp(-(((h-19+12)%24)-12)**2/6) + 5*np.sin(2*np.pi*(h-10)/24)
    price = round(base - 30*(w-0.3) + rng.normal(0, 5), 2)
    bid = round(rng.uniform(-10, 5), 2)
    if bid > price:
        cleared = round(hsl*rng.uniform(0.0, 0.2), 1)
    else:
        cleared = round(hsl*rng.uniform(0.05, 0.35), 1)
    rows.append((t, bid, price, hsl, lsl, cleared))
wr = csv.writer(sys.stdout)
wr.writerow("hour,bid_price_usd_mwh,cleared_price_usd_mwh,hsl_mw,lsl_mw,cleared_power_mw".split(","))
for r in rows: wr.writerow(r)
