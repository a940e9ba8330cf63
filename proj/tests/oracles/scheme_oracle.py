"""Reference enumeration of multi-resolution schemes.

Pass 1 runs lookahead-AR over every s0-th frame; later passes take the not
yet inpainted frames on their stride in ascending order, in blocks of K/2,
each conditioned on the K - |block| inpainted frames closest to the block
(distance to the nearest block member, ties toward earlier frames).
"""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parents[1] / "data"


def lookahead(n, k):
    if n <= k:
        return [(list(range(n)), [], [])]
    past = future = k // 4
    latent = k - past - future
    first = k - future
    fut = list(range(first, min(n, first + future)))
    stages = [(list(range(first)), fut, fut)]
    nxt = first
    while nxt < n:
        nx = min(latent, n - nxt)
        fut = list(range(nxt + nx, min(n, nxt + nx + future)))
        npast = min(nxt, k - nx - len(fut))
        stages.append((list(range(nxt, nxt + nx)), list(range(nxt - npast, nxt)) + fut, fut))
        nxt += nx
    return stages


def multires(n, k, strides):
    if n <= k:
        return [(list(range(n)), [], [])]
    sub = list(range(0, n, strides[0]))
    stages = []
    for x, y, inc in lookahead(len(sub), k):
        stages.append(([sub[i] for i in x], [sub[i] for i in y], [sub[i] for i in inc]))
    done = set(sub)
    for stride in strides[1:]:
        pending = [f for f in range(0, n, stride) if f not in done]
        for b in range(0, len(pending), k // 2):
            x = pending[b:b + k // 2]
            ranked = sorted(done, key=lambda d: (min(abs(d - xi) for xi in x), d))
            y = sorted(ranked[:k - len(x)])
            stages.append((x, y, []))
            done.update(x)
    return stages


def to_json(kind, n, k, stages):
    return {
        "kind": kind,
        "n_frames": n,
        "budget": k,
        "stages": [{"x": sorted(x), "y": sorted(y), "incomplete": [f in inc for f in sorted(y)]} for x, y, inc in stages],
    }


golden = to_json("multires-ar-3", 200, 16, multires(200, 16, [15, 5, 1]))
(OUT / "scheme_multires3_n200_k16.json").write_text(json.dumps(golden, indent=1) + "\n")
golden2 = to_json("multires-ar-2", 64, 8, multires(64, 8, [3, 1]))
(OUT / "scheme_multires2_n64_k8.json").write_text(json.dumps(golden2, indent=1) + "\n")
print(len(golden["stages"]), "stages;", "pass-1 latents", golden["stages"][0]["x"])
print(len(golden2["stages"]), "stages for multires-ar-2 N=64 K=8")
