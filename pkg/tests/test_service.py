import io
import threading

import pytest
from fastapi.testclient import TestClient
from PIL import Image

from travrank.errors import (
    AlreadyLabeled,
    LeaseExpired,
    NoPendingTasks,
    NothingToUndo,
)
from travrank.pairgen import generate_pair_tasks, write_tasks
from travrank.service import TaskPool, create_app
from travrank.store import AnnotationStore, read_annotations
from travrank.types import load_manifest


@pytest.fixture()
def world(small_world, tmp_path):
    manifest = small_world["manifest"]
    tasks = generate_pair_tasks(manifest, seed=77)
    tasks_path = tmp_path / "tasks.jsonl"
    write_tasks(tasks, tasks_path)
    return {
        "manifest": manifest,
        "tasks": tasks,
        "tasks_path": tasks_path,
        "ann_path": tmp_path / "labels.jsonl",
    }


@pytest.fixture()
def client(world, small_world):
    app = create_app(
        small_world["dir"] / "manifest.jsonl",
        world["tasks_path"],
        world["ann_path"],
    )
    return TestClient(app)


def make_pool(world, lease_seconds=600.0, clock=None):
    store = AnnotationStore(world["ann_path"], world["manifest"])
    kwargs = {"lease_seconds": lease_seconds}
    if clock is not None:
        kwargs["clock"] = clock
    return TaskPool(world["tasks"], store, **kwargs)


# --- pool-level behavior ---


def test_next_task_leases_in_order(world):
    pool = make_pool(world)
    task = pool.next_task("s1")
    assert task.task_id == world["tasks"][0].task_id
    other = pool.next_task("s2")
    assert other.task_id != task.task_id  # leased tasks are not re-dispensed


def test_exhausted_pool_raises(world):
    pool = make_pool(world)
    for task in list(world["tasks"]):
        got = pool.next_task("s")
        pool.submit_label(got.task_id, 0, "s")
    with pytest.raises(NoPendingTasks):
        pool.next_task("s")


def test_double_submit_rejected(world):
    pool = make_pool(world)
    task = pool.next_task("s")
    pool.submit_label(task.task_id, 1, "s")
    with pytest.raises(AlreadyLabeled):
        pool.submit_label(task.task_id, 1, "s")


def test_lease_expiry_releases_task(world):
    now = [0.0]
    pool = make_pool(world, lease_seconds=10.0, clock=lambda: now[0])
    task = pool.next_task("s1")
    now[0] = 11.0  # lease timed out
    again = pool.next_task("s2")
    assert again.task_id == task.task_id
    with pytest.raises(LeaseExpired):
        pool.submit_label(task.task_id, 0, "s1")
    pool.submit_label(task.task_id, 0, "s2")


def test_concurrent_claims_disjoint(world):
    pool = make_pool(world)
    claimed: list[str] = []
    lock = threading.Lock()
    errors: list[Exception] = []

    def claim():
        try:
            task = pool.next_task(threading.current_thread().name)
            with lock:
                claimed.append(task.task_id)
        except NoPendingTasks:
            pass
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=claim) for _ in range(100)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert not errors
    assert len(claimed) == len(set(claimed))  # no task handed to two sessions


def test_undo_then_resubmit_reflects_new_label_only(world):
    pool = make_pool(world)
    task = pool.next_task("s")
    pool.submit_label(task.task_id, 1, "s")
    pool.undo_last("s")
    again = pool.next_task("s")
    assert again.task_id == task.task_id  # undone task returns to the front
    pool.submit_label(task.task_id, -1, "s")
    effective = read_annotations(world["ann_path"])
    mine = [a for a in effective if a.pair_id == task.task_id]
    assert len(mine) == 1 and mine[0].t == -1


def test_undo_empty_session(world):
    pool = make_pool(world)
    with pytest.raises(NothingToUndo):
        pool.undo_last("fresh")


def test_crash_recovery_replays_log(world):
    pool = make_pool(world)
    t1 = pool.next_task("s")
    pool.submit_label(t1.task_id, 1, "s")
    t2 = pool.next_task("s")
    pool.skip(t2.task_id, "s")
    t3 = pool.next_task("s")
    pool.submit_label(t3.task_id, 0, "s")
    pool.undo_last("s")  # retract t3
    before = {tid: t.status for tid, t in pool.tasks.items()}
    rebuilt = make_pool(world)  # replay from the same file
    after = {tid: t.status for tid, t in rebuilt.tasks.items()}
    assert after == before
    assert after[t1.task_id] == "labeled"
    assert after[t2.task_id] == "skipped"
    assert after[t3.task_id] == "pending"


def test_progress_accounting(world):
    pool = make_pool(world)
    n = len(world["tasks"])
    assert pool.progress()["pending"] == n
    task = pool.next_task("s")
    pool.submit_label(task.task_id, 1, "s")
    skip_me = pool.next_task("s")
    pool.skip(skip_me.task_id, "s")
    prog = pool.progress()
    assert prog["labeled"] == 1 and prog["skipped"] == 1
    assert prog["pending"] == n - 2
    # fully labeled pool reports 3 labels per 2 images
    while True:
        try:
            t = pool.next_task("s")
        except NoPendingTasks:
            break
        pool.submit_label(t.task_id, 0, "s")
    prog = pool.progress()
    assert prog["labeled"] == n - 1
    done_ratio = 2.0 * (prog["intra_labeled"] + prog["cross_labeled"] / 2.0) / prog["images"]
    assert prog["labels_per_two_images"] == pytest.approx(done_ratio)


# --- HTTP surface ---


def test_http_task_cycle(client):
    task = client.get("/api/tasks/next", params={"session": "web"}).json()
    assert {"task_id", "kind", "a", "b"} <= set(task)
    assert task["a"]["image_url"].startswith("/api/images/")
    resp = client.post(
        f"/api/tasks/{task['task_id']}/label", params={"session": "web"}, json={"t": 0}
    )
    assert resp.status_code == 200
    prog = client.get("/api/progress").json()
    assert prog["labeled"] == 1


def test_http_invalid_label(client):
    task = client.get("/api/tasks/next", params={"session": "web"}).json()
    resp = client.post(
        f"/api/tasks/{task['task_id']}/label", params={"session": "web"}, json={"t": 2}
    )
    assert resp.status_code == 422
    body = resp.json()
    assert body["code"] == "invalid_label" and "message" in body


def test_http_unknown_task(client):
    resp = client.post("/api/tasks/ghost/label", params={"session": "web"}, json={"t": 0})
    assert resp.status_code == 404
    assert resp.json()["code"] == "unknown_task"


def test_http_undo_flow(client):
    resp = client.post("/api/undo", params={"session": "web"})
    assert resp.status_code == 409
    assert resp.json()["code"] == "nothing_to_undo"
    task = client.get("/api/tasks/next", params={"session": "web"}).json()
    client.post(f"/api/tasks/{task['task_id']}/label", params={"session": "web"}, json={"t": 1})
    resp = client.post("/api/undo", params={"session": "web"})
    assert resp.status_code == 200
    assert resp.json()["task_id"] == task["task_id"]
    assert client.get("/api/progress").json()["labeled"] == 0


def test_http_skip(client):
    task = client.get("/api/tasks/next", params={"session": "web"}).json()
    resp = client.post(f"/api/tasks/{task['task_id']}/skip", params={"session": "web"})
    assert resp.status_code == 200
    assert client.get("/api/progress").json()["skipped"] == 1


def test_http_image_payload(client, world):
    image_id = world["manifest"].images[0].image_id
    resp = client.get(f"/api/images/{image_id}")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    img = Image.open(io.BytesIO(resp.content))
    assert img.mode == "RGB"
    assert img.size == (world["manifest"].images[0].width, world["manifest"].images[0].height)
    missing = client.get("/api/images/nope")
    assert missing.status_code == 404


def test_http_exhaustion_code(client, world):
    for _ in range(len(world["tasks"])):
        task = client.get("/api/tasks/next", params={"session": "w"}).json()
        client.post(f"/api/tasks/{task['task_id']}/label", params={"session": "w"}, json={"t": 0})
    resp = client.get("/api/tasks/next", params={"session": "w"})
    assert resp.status_code == 404
    assert resp.json()["code"] == "no_pending_tasks"
