import json, time
import numpy as np
import wormsim as ws

def sweep(g, lambdas, mac, runs=500, seeds=5, master=2024):
    out = []
    for lam in lambdas:
        p = ws.EpidemicParams(lam, 1.0, mac)
        t0 = time.time()
        st = ws.ensemble(g, p, runs, seeds, ws.derive_seed(master, "cell", f"{lam!r}", int(mac)), n_workers=2)
        out.append(dict(lam=lam, prev=st.prevalence_mean, prev_c=st.prevalence_conditional,
                        chi=st.susceptibility, se=st.std_error, outbreaks=st.outbreak_count,
                        secs=round(time.time()-t0, 1)))
        print(out[-1], flush=True)
    return out

cfg = ws.NetworkConfig(10000, 1000.0, 50.0, True)
g = ws.build_rgg(ws.place_nodes(cfg, ws.generator_for(1, "graph", 10000, 0)), cfg)
kmeas = 2 * g.n_edges / g.n_nodes
print("RGG built, <k> =", kmeas, flush=True)

res = {}
grid = np.geomspace(0.010, 0.040, 16)
print("--- RGG MAC off ---", flush=True)
res["rgg_off"] = sweep(g, grid, False)
print("--- RGG MAC on ---", flush=True)
res["rgg_on"] = sweep(g, grid, True)

er = ws.build_er_matched(10000, kmeas, ws.generator_for(1, "ergraph"), cfg)
print("ER built, <k> =", 2 * er.n_edges / er.n_nodes, flush=True)
print("--- ER ---", flush=True)
res["er"] = sweep(er, np.geomspace(0.007, 0.028, 16), False)

res["k_rgg"] = kmeas
res["k_er"] = 2 * er.n_edges / er.n_nodes
json.dump(res, open("/root/pkg/.calib/calib1.json", "w"), indent=1)
print("DONE", flush=True)
