"""Regenerates pmv_reference.csv from pythermalcomfort (ISO 7730)."""
from pythermalcomfort.models import pmv_ppd_iso

print("t_air_c,clo,met,rh,vr,pmv")
for t in (18.0, 20.0, 22.0, 24.0, 26.0):
    for clo in (0.5, 1.0, 1.5):
        for met in (1.0, 1.2):
            r = pmv_ppd_iso(tdb=t, tr=t, vr=0.1, rh=50, met=met, clo=clo,
                            limit_inputs=False, round_output=False)
            print(f"{t},{clo},{met},50,0.1,{float(r.pmv):.6f}")
