"""The session service, end to end over real HTTP.

Boots the service on a local port, registers the demo study, and scripts an
examinee through a complete adaptive test: create session, answer items,
fetch the result document.
Run: python demos/05_service_walkthrough.py
"""

import json
import threading
import time
from pathlib import Path

import httpx
import uvicorn

from catlab.service import Settings, create_app

PORT = 8765
BASE = f"http://127.0.0.1:{PORT}"

server = uvicorn.Server(
    uvicorn.Config(create_app(Settings()), host="127.0.0.1", port=PORT, log_level="warning")
)
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
print(f"service up: {httpx.get(BASE + '/healthz').json()}")

bank_doc = json.loads(Path(__file__).with_name("demo_bank.json").read_text())
config = {
    "name": "demo likert study",
    "model": "GRM",
    "max_items": 8,
    "min_items": 4,
    "min_sem": 0.45,
    "seed": 11,
    "demographics": [{"name": "Age", "kind": "integer"}],
}
study_id = httpx.post(BASE + "/studies", json={"config": config, "bank": bank_doc}).json()["study_id"]
print(f"study registered: {study_id}")

created = httpx.post(f"{BASE}/studies/{study_id}/sessions", json={}).json()
session_id = created["session_id"]
print(f"session {session_id}: first step is a {created['step']['kind']} form")

step = httpx.post(
    f"{BASE}/sessions/{session_id}/responses", json={"demographics": {"Age": "31"}}
).json()["next"]

answers = [4, 3, 4, 2, 3, 4, 3, 4]
position = 0
while step["kind"] == "item":
    item = step["item"]
    print(f"  item {item['position']}: {item['prompt'][:48]}...  "
          f"({item['categories']} options)")
    snapshot = httpx.post(
        f"{BASE}/sessions/{session_id}/responses",
        json={"item_id": item["item_id"], "value": answers[position % len(answers)]},
    ).json()
    step = snapshot["next"]
    position += 1

result = httpx.get(f"{BASE}/sessions/{session_id}/result").json()
print(f"\nresult: theta {result['theta']:+.3f} +- {result['se']:.3f} "
      f"after {result['n_items']} items ({result['stop_reason']})")

server.should_exit = True
thread.join(timeout=5)
print("service stopped")
