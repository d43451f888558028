"""The interactive loop over HTTP, exactly as the browser UI drives it.

Uses the in-process test client so no server process is needed; swap it for
any HTTP client against `splatselect serve` and the calls are identical:
create a session, paint, project, auto-segment, browse tracked frames, add a
correction, undo, export.
"""

import base64
import json
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from splatselect import Camera, GaussianScene, Selection3D, save_scene
from splatselect.providers import mask_to_png_bytes, silhouette_mask
from splatselect.service import create_app

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

rng = np.random.default_rng(6)
target = rng.normal((0, 0, 0), 0.25, (300, 3))
other = rng.normal((0, 1.3, 0.2), 0.25, (250, 3))
scene = GaussianScene.create(np.vstack([target, other]),
                             log_scales=np.log(0.045), opacity_logits=4.0)
scene_path = out_dir / "service_scene.ply"
save_scene(scene, scene_path)

cam = Camera.look_at((3.0, 0.4, 0.3), (0, 0, 0), (0, 1, 0),
                     fx=48, fy=48, cx=32, cy=32, width=64, height=64, near=0.05, far=40)

client = TestClient(create_app())

r = client.post("/sessions", json={"scene_path": str(scene_path)})
sid = r.json()["session_id"]
print(f"session {sid}: {r.json()['gaussian_count']} gaussians")

# Render the viewport.
png = client.post(f"/sessions/{sid}/render",
                  json={"camera": cam.to_json(), "channels": ["rgb"]}).content
(out_dir / "service_view.png").write_bytes(png)

# Paint a rough blob over the target, flag it occlusion-free.
r = client.post(f"/sessions/{sid}/mask/paint", json={
    "camera": cam.to_json(),
    "stroke": [[28, 30], [36, 34], [32, 38]],
    "radius": 9, "value": True, "mode": "N", "occlusion_free": True,
})
print(f"painted mask: {r.json()['mask_pixels']} pixels")

# Quick manual pass: frustum projection of the painted mask.
r = client.post(f"/sessions/{sid}/project", json={"kind": "frustum", "mode": "N"})
print(f"frustum projection selected {r.json()['count']} gaussians")

# Automatic pass (streams per-view losses; final line carries the result).
with client.stream("POST", f"/sessions/{sid}/autoseg",
                   json={"m": 10, "presegment": True, "stream": True}) as r:
    events = [json.loads(line) for line in r.iter_lines() if line]
result = events[-1]
print(f"autoseg: {len(events) - 1} progress events, "
      f"{result['count']} selected in {result['elapsed']:.2f}s")
job_id = result["job_id"]

# Browse a tracked frame (PNG with the mask tinted in).
frame = client.get(f"/sessions/{sid}/jobs/{job_id}/frames/4").content
(out_dir / "service_tracked_frame.png").write_bytes(frame)

# Add a correction for frame 4: here, the target's true silhouette.
true_mask = silhouette_mask(scene, Selection3D(np.arange(scene.count) < 300),
                            cam, closing=False)
r = client.post(f"/sessions/{sid}/jobs/{job_id}/corrections", json={
    "position": 4,
    "mask_png_base64": base64.b64encode(mask_to_png_bytes(true_mask)).decode(),
})
print(f"after correction: {r.json()['count']} selected")

# Undo the correction's selection update, then redo it.
print(f"undo -> {client.post(f'/sessions/{sid}/undo').json()['count']} selected")
print(f"redo -> {client.post(f'/sessions/{sid}/redo').json()['count']} selected")

# Export the object.
r = client.post(f"/sessions/{sid}/export",
                json={"path": str(out_dir / "service_object.ply"), "invert": False})
print(f"exported {r.json()['written']} gaussians to service_object.ply")
