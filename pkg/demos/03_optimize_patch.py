"""Train a small adversarial patch against the surrogate detector and save it."""

from pathlib import Path

from motpatch.geometry import BBox, FrameDims, iou
from motpatch.io import save_loss_trace, save_patch
from motpatch.patchopt.optimize import optimize_patch
from motpatch.patchopt.scene import Scene, SceneTarget, render
from motpatch.patchopt.surrogate import detect

scene = Scene(dims=FrameDims(320, 180), targets=(SceneTarget(box=BBox(136, 40, 48, 96)),))
res = optimize_patch([scene])

out = Path("runs/demo-patch")
out.mkdir(parents=True, exist_ok=True)
save_patch(out / "patch.ppm", res.patch)
save_loss_trace(out / "loss_trace.csv", res.trace)

raster, _ = render(scene, res.patch)
hits = [d for d in detect(raster) if iou(d.box, scene.targets[0].box) > 0.2]
print(f"loss {res.initial.total:.4f} -> {res.final.total:.4f} "
      f"(ratio {res.final.total / res.initial.total:.3f})")
print(f"surrogate detections on the patched body: {len(hits)}")
print(f"wrote {out / 'patch.ppm'} and {out / 'loss_trace.csv'}")
