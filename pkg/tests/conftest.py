from __future__ import annotations

import json
from pathlib import Path

import pytest

from iacq.catalog import load_default_catalog

# The worked single-play example used as the extraction golden fixture:
# 8 lines, no blanks, no comments, one task installing a package.
NGINX_PLAYBOOK = """- name: Install Nginx
  hosts: web_servers
  become: yes
  tasks:
    - name: Install Nginx
      apt:
        name: nginx
        state: present
"""


@pytest.fixture(scope="session")
def default_defs():
    return load_default_catalog()


def make_repo(root: Path, files: dict[str, str], sidecar: dict | None = None) -> Path:
    """Materialize a repository fixture: {relative path: content}."""
    root.mkdir(parents=True, exist_ok=True)
    for rel, content in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    if sidecar is not None:
        (root / "galaxy_meta.json").write_text(json.dumps(sidecar), encoding="utf-8")
    return root


@pytest.fixture
def nginx_repo(tmp_path: Path) -> Path:
    return make_repo(tmp_path / "nginx-demo", {"site.yml": NGINX_PLAYBOOK})


def sidecar_record(**overrides) -> dict:
    record = {
        "download_count": 120,
        "tag_count": 3,
        "total_versions": 2,
        "dependency_count": 1,
        "supported_platform_count": 4,
        "stars": 25,
        "forks": 6,
        "open_issues": 2,
        "min_ansible_version": "2.9",
        "version_release_times": ["2021-01-10T00:00:00Z", "2021-03-11T00:00:00Z"],
        "observed_at": "2021-06-01T00:00:00Z",
    }
    record.update(overrides)
    return record


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.rsplit("::", 1)[-1]
        status = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {name}: {status}", flush=True)
