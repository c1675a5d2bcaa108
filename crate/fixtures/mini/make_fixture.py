"""Writes the mini fixture: five 10 km square counties in a row, each split
into two tracts, and twenty road links of which two are malformed."""
import csv, json

L = 10000.0
counties, tracts = [], []
for k in range(5):
    x0, x1 = k * L, (k + 1) * L
    cid = f"C{k + 1}"
    counties.append({"id": cid, "rings": [[[x0, 0], [x1, 0], [x1, L], [x0, L]]]})
    tracts.append({"id": f"{cid}-T1", "rings": [[[x0, 0], [x1, 0], [x1, L / 2], [x0, L / 2]]]})
    tracts.append({"id": f"{cid}-T2", "rings": [[[x0, L / 2], [x1, L / 2], [x1, L], [x0, L]]]})
json.dump({"zones": counties}, open("counties.json", "w"), indent=1)
json.dump({"zones": tracts}, open("tracts.json", "w"), indent=1)

routes = ["interstate", "freeway_expressway", "other_principal_arterial",
          "minor_arterial", "major_collector", "minor_collector"]
rows = []
for i in range(20):
    k = i % 5
    x = k * L + 1000 + 400 * i
    y = 2500 if i % 2 == 0 else 7500
    mp0 = 10.0 + i
    length = 0.5 + 0.25 * (i % 7)
    rows.append([f"L{i + 1:02d}", mp0, mp0 + length, 800 + 137 * i, 150 + 41 * (i % 6),
                 routes[i % 6], x, y, "" if i % 4 == 3 else f"C{k + 1}"])
rows[6][2] = rows[6][1] - 1.0      # reversed mileposts
rows[14][3] = "n/a"                # unparseable count
with open("links.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["link_id", "mp_start", "mp_end", "adtt_long", "adtt_nonlong", "route_type",
                "centroid_x", "centroid_y", "county_id"])
    w.writerows(rows)

# MSC surface: one 10 km cell per county, $/t in 2010 dollars.
with open("msc_header.toml", "w") as f:
    f.write('dollar_year = 2010\npopulation_year = 2017\nbase_vsl = 8.6e6\nelevation = "ground"\n\n'
            '[grid]\norigin = { x = 0.0, y = 0.0 }\ncell_size = 10000.0\nn_cols = 5\nn_rows = 1\n')
with open("msc_values.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["pollutant", "col", "row", "usd_per_ton"])
    for p, base in [("PM2.5", 150000), ("SO2", 40000), ("NOx", 12000)]:
        for c in range(5):
            w.writerow([p, c, 0, base + 10000 * c])

# Source-receptor matrix: damage stays mostly local and drifts east.
with open("sr_matrix.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["pollutant", "source_id", "receptor_id", "usd_per_ton"])
    for p, scale in [("PM2.5", 100000), ("SO2", 30000), ("NOx", 8000)]:
        for s in range(5):
            w.writerow([p, f"C{s + 1}", f"C{s + 1}", scale])
            if s + 1 < 5:
                w.writerow([p, f"C{s + 1}", f"C{s + 2}", scale // 2])
            if s > 0:
                w.writerow([p, f"C{s + 1}", f"C{s}", scale // 10])

with open("shipments.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["id", "weight_lb", "distance_mi", "weighting_factor"])
    for i in range(10):
        w.writerow([f"S{i + 1:02d}", 4000 * (i + 1), 100 + 120 * i, 10 + 5 * i])
