import json, time
import numpy as np
import wormsim as ws
from wormsim.analysis import (EnsembleSettings, scan_threshold, estimate_threshold,
                              ThresholdMethod, speed_metrics, growth_classification,
                              scaling_collapse, sweep_prevalence)

t_start = time.time()
MASTER = 20260810
res = {"thresholds": {}, "curves": {}, "tmax": {}, "growth": {}}

graphs = {}
for n in (4000, 6000, 8000, 10000, 20000):
    cfg = ws.NetworkConfig(n, 1000.0, 50.0, True)
    g = ws.build_rgg(ws.place_nodes(cfg, ws.generator_for(MASTER, "graph", n, 0)), cfg)
    graphs[n] = g
    print(f"graph N={n} <k>={2*g.n_edges/g.n_nodes:.2f} built", flush=True)

settings = EnsembleSettings(n_runs=500, n_seed_nodes=5, master_seed=MASTER, n_workers=2)

# threshold sweeps: RGG and RGG+MAC at the four Fig-2 densities
for n in (6000, 8000, 10000, 20000):
    for mac in (False, True):
        label = f"{'rggmac' if mac else 'rgg'}_{n}"
        t0 = time.time()
        curve = scan_threshold(graphs[n], 1.0, mac, settings)
        res["curves"][label] = dict(
            lams=[p.infection_rate for p in curve.points],
            prev=[p.prevalence_mean for p in curve.points],
            prev_c=[p.prevalence_conditional for p in curve.points],
            chi=[p.susceptibility for p in curve.points],
            se=[p.std_error for p in curve.points],
            k=curve.mean_degree, kind=curve.topology_kind, n=n)
        ests = {}
        for m in ThresholdMethod:
            try:
                e = estimate_threshold(curve, m)
                ests[m.value] = dict(lam=e.lambda_c, unc=e.uncertainty, kappa=e.kappa_c)
            except Exception as ex:
                ests[m.value] = dict(error=str(ex))
        res["thresholds"][label] = ests
        print(f"{label}: {time.time()-t0:.0f}s {ests}", flush=True)

# ER at N=10000
k10 = 2 * graphs[10000].n_edges / graphs[10000].n_nodes
er = ws.build_er_matched(10000, k10, ws.generator_for(MASTER, "ergraph", 10000, 0), graphs[10000].config)
t0 = time.time()
curve = scan_threshold(er, 1.0, False, settings)
res["curves"]["er_10000"] = dict(
    lams=[p.infection_rate for p in curve.points], prev=[p.prevalence_mean for p in curve.points],
    prev_c=[p.prevalence_conditional for p in curve.points],
    chi=[p.susceptibility for p in curve.points], se=[p.std_error for p in curve.points],
    k=curve.mean_degree, kind=curve.topology_kind, n=10000)
ests = {}
for m in ThresholdMethod:
    e = estimate_threshold(curve, m)
    ests[m.value] = dict(lam=e.lambda_c, unc=e.uncertainty, kappa=e.kappa_c)
res["thresholds"]["er_10000"] = ests
print(f"er_10000: {time.time()-t0:.0f}s {ests}", flush=True)

# lambda=0.1 ensembles for T_max / prevalence-vs-N / growth
for n in (4000, 6000, 8000, 10000, 20000):
    for mac in (False, True):
        label = f"{'rggmac' if mac else 'rgg'}_{n}"
        t0 = time.time()
        st = ws.ensemble(graphs[n], ws.EpidemicParams(0.1, 1.0, mac), 500, 5,
                         ws.derive_seed(MASTER, "hi", n, int(mac)), n_workers=2)
        sm = speed_metrics(st)
        res["tmax"][label] = dict(tmax=sm.t_max, peak=sm.peak_height,
                                  prev=st.prevalence_mean, curve=st.mean_i_curve.tolist())
        print(f"tmax {label}: {time.time()-t0:.0f}s tmax={sm.t_max} peak={sm.peak_height:.4f} prev={st.prevalence_mean:.4f}", flush=True)

st = ws.ensemble(er, ws.EpidemicParams(0.1, 1.0, False), 500, 5, ws.derive_seed(MASTER, "hi", "er"), n_workers=2)
sm = speed_metrics(st)
res["tmax"]["er_10000"] = dict(tmax=sm.t_max, peak=sm.peak_height, prev=st.prevalence_mean,
                               curve=st.mean_i_curve.tolist())
print(f"tmax er: tmax={sm.t_max} peak={sm.peak_height:.4f}", flush=True)

for label in ("er_10000", "rgg_10000", "rggmac_10000"):
    curve = np.array(res["tmax"][label]["curve"])
    prof = curve[: int(np.argmax(curve)) + 1]
    try:
        fit = growth_classification(prof, 10000)
        res["growth"][label] = dict(cls=fit.classification.value, r2=fit.r_squared,
                                    slope=fit.slope, n=fit.n_points)
    except Exception as ex:
        res["growth"][label] = dict(error=str(ex))
    print(f"growth {label}: {res['growth'][label]}", flush=True)

json.dump(res, open("/root/pkg/.calib/calib2.json", "w"))
print(f"TOTAL {time.time()-t_start:.0f}s DONE", flush=True)
