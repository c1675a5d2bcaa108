"""Spreadsheet-style oracle for the mini fixture inventory: every accepted
link's tons, summed per county and in total, with GREET factors."""
import csv

EF = {"combination": {"PM2.5": 0.086, "SO2": 0.0149, "NOx": 4.585, "CO2": 1588.0},
      "single_unit": {"PM2.5": 0.0467, "SO2": 0.0070, "NOx": 0.9383, "CO2": 1414.0}}
GF = 1.02 ** 5
totals, by_county = {}, {}
accepted = 0
for r in csv.DictReader(open("links.csv")):
    try:
        a_long, a_non = float(r["adtt_long"]), float(r["adtt_nonlong"])
        length = float(r["mp_end"]) - float(r["mp_start"])
    except ValueError:
        continue
    if length <= 0:
        continue
    accepted += 1
    county = r["county_id"] or "C%d" % (int(float(r["centroid_x"]) // 10000) + 1)
    for p in EF["combination"]:
        g = (a_long * 0.98 * 0.99 * length * 365 * GF * EF["combination"][p]
             + a_non * 0.98 * 0.99 * length * 365 * GF * EF["single_unit"][p])
        totals[p] = totals.get(p, 0.0) + g / 1e6
        by_county[(county, p)] = by_county.get((county, p), 0.0) + g / 1e6
print("accepted", accepted)
for p, t in totals.items():
    print(p, repr(t))
for k in sorted(by_county):
    if k[1] == "PM2.5":
        print(k, repr(by_county[k]))
