from __future__ import annotations

import io
import json
import urllib.error
import urllib.request
from datetime import datetime, timezone

import pytest

from iacq.errors import IngestError
from iacq.ingest import (
    FileFacts,
    count_loc,
    fetch_registry_metadata,
    parse_galaxy_metadata,
    parse_yaml_doc,
    scan_repo,
)

from conftest import NGINX_PLAYBOOK, make_repo, sidecar_record


class TestParseYamlDoc:
    def test_line_identity(self):
        doc = parse_yaml_doc("x.yml", "a: 1\n\n# c\nb: 2\n")
        assert doc.raw_line_count == 4
        assert doc.blank_line_count == 1
        assert doc.comment_line_count == 1
        assert doc.code_line_count == 2
        assert doc.raw_line_count == (
            doc.blank_line_count + doc.comment_line_count + doc.code_line_count
        )

    def test_malformed_keeps_line_counts(self):
        doc = parse_yaml_doc("bad.yml", "a: [unclosed\nb: }{\n")
        assert doc.parse_error
        assert doc.documents == ()
        assert doc.raw_line_count == 2
        assert doc.code_line_count == 2

    def test_vault_tag_is_tolerated(self):
        doc = parse_yaml_doc("v.yml", "secret: !vault |\n  $ANSIBLE_VAULT;1.1;AES256\n  6134\n")
        assert doc.parse_error is None
        assert doc.documents[0]["secret"].strip().startswith("$ANSIBLE_VAULT")

    def test_multi_document_file(self):
        doc = parse_yaml_doc("m.yml", "---\na: 1\n---\nb: 2\n")
        assert len(doc.documents) == 2

    def test_play_and_task_spans(self):
        doc = parse_yaml_doc("site.yml", NGINX_PLAYBOOK)
        assert doc.play_sizes == (8,)
        assert doc.task_sizes == (4,)
        assert doc.play_names == ("Install Nginx",)
        assert doc.task_names == ("Install Nginx",)
        assert doc.name_key_count == 2

    def test_task_file_entries_are_tasks(self):
        text = "- name: one\n  debug:\n    msg: hi\n\n- name: two\n  debug:\n    msg: ho\n"
        doc = parse_yaml_doc("tasks/main.yml", text)
        assert doc.play_sizes == ()
        assert doc.task_sizes == (3, 3)  # blank separator is not counted
        assert doc.task_names == ("one", "two")

    def test_block_entries_count_wrapper_and_inner(self):
        text = (
            "- name: wrapper\n"
            "  block:\n"
            "    - name: inner\n"
            "      debug:\n"
            "        msg: hi\n"
            "  rescue:\n"
            "    - name: saver\n"
            "      debug:\n"
            "        msg: oops\n"
        )
        doc = parse_yaml_doc("tasks/main.yml", text)
        assert len(doc.task_sizes) == 3
        assert set(doc.task_names) == {"wrapper", "inner", "saver"}

    def test_import_playbook_entries_are_not_tasks(self):
        text = "- import_playbook: other.yml\n- name: play\n  hosts: all\n  tasks: []\n"
        doc = parse_yaml_doc("site.yml", text)
        assert len(doc.play_sizes) == 1
        assert doc.task_sizes == ()


class TestCountLoc:
    def test_worked_example(self):
        doc = parse_yaml_doc("site.yml", NGINX_PLAYBOOK)
        assert count_loc([doc]) == 8

    def test_blank_and_comment_lines_excluded(self):
        text = "a: 1\nb: 2\n\n\n\n# one\n# two\nc: 3\nd: 4\ne: 5\n"
        doc = parse_yaml_doc("x.yml", text)
        assert doc.raw_line_count == 10
        assert count_loc([doc]) == 5

    def test_empty(self):
        assert count_loc([]) == 0

    def test_additivity(self):
        a = parse_yaml_doc("a.yml", "x: 1\ny: 2\n")
        b = parse_yaml_doc("b.yml", "# comment\nz: 3\n")
        assert count_loc([a, b]) == count_loc([a]) + count_loc([b])


class TestScanRepo:
    def test_nginx_fixture(self, nginx_repo):
        snap = scan_repo(nginx_repo)
        assert len(snap.yaml_docs) == 1
        assert snap.loc == 8
        assert snap.repo_id == "nginx-demo"

    def test_empty_directory(self, tmp_path):
        root = tmp_path / "empty"
        root.mkdir()
        snap = scan_repo(root)
        assert snap.yaml_docs == ()
        assert snap.loc == 0
        assert snap.file_facts == FileFacts()
        assert snap.metadata is None

    def test_missing_root(self, tmp_path):
        with pytest.raises(IngestError) as exc:
            scan_repo(tmp_path / "nope")
        assert exc.value.kind == "io"

    def test_readme_and_license_facts(self, tmp_path):
        words = " ".join(f"w{i}" for i in range(120))
        repo = make_repo(
            tmp_path / "r",
            {"README.md": words, "LICENSE": "MIT", "site.yml": NGINX_PLAYBOOK},
        )
        snap = scan_repo(repo)
        # Oracle: whitespace-token count of the fixture text.
        assert snap.file_facts.readme_word_count == len(words.split()) == 120
        assert snap.file_facts.readme_count == 1
        assert snap.file_facts.license_present is True
        assert snap.file_facts.file_count == 3
        assert snap.file_facts.yaml_file_count == 1

    def test_template_and_directory_facts(self, tmp_path):
        repo = make_repo(
            tmp_path / "r",
            {
                "templates/nginx.conf.j2": "server {}",
                "tasks/main.yml": "- name: t\n  debug:\n    msg: x\n",
            },
        )
        facts = scan_repo(repo).file_facts
        assert facts.template_file_count == 1
        assert facts.directory_count == 2
        assert facts.file_count == 2

    def test_ignore_globs_prune_directories(self, tmp_path):
        repo = make_repo(
            tmp_path / "r",
            {
                "site.yml": NGINX_PLAYBOOK,
                ".git/config.yml": "x: 1\n",
                "molecule/default/molecule.yml": "y: 2\n",
            },
        )
        snap = scan_repo(repo)
        assert [d.path for d in snap.yaml_docs] == ["site.yml"]
        assert snap.file_facts.file_count == 1
        assert snap.file_facts.directory_count == 0

    def test_custom_ignore(self, tmp_path):
        repo = make_repo(tmp_path / "r", {"site.yml": "a: 1\n", "skipme/x.yml": "b: 2\n"})
        snap = scan_repo(repo, ignore_globs=("skipme",))
        assert [d.path for d in snap.yaml_docs] == ["site.yml"]

    def test_malformed_yaml_warns_but_counts_lines(self, tmp_path):
        repo = make_repo(tmp_path / "r", {"good.yml": "a: 1\n", "bad.yml": "x: [1,\ny: }\n"})
        snap = scan_repo(repo)
        assert any("parse warning" in w for w in snap.warnings)
        assert snap.loc == 3  # 1 good line + 2 malformed lines in the denominator

    def test_determinism(self, nginx_repo):
        assert scan_repo(nginx_repo) == scan_repo(nginx_repo)

    def test_duplication_doubles_loc(self, tmp_path):
        repo = make_repo(tmp_path / "r", {"site.yml": NGINX_PLAYBOOK})
        before = scan_repo(repo).loc
        (repo / "copy_site.yml").write_text(NGINX_PLAYBOOK, encoding="utf-8")
        assert scan_repo(repo).loc == 2 * before

    def test_sidecar_autoload(self, tmp_path):
        repo = make_repo(tmp_path / "r", {"site.yml": "a: 1\n"}, sidecar=sidecar_record())
        snap = scan_repo(repo)
        assert snap.metadata is not None
        assert snap.metadata.stars == 25
        # The sidecar is harness input, not repository content.
        assert snap.file_facts.file_count == 1

    def test_explicit_sidecar_missing_is_an_error(self, tmp_path):
        repo = make_repo(tmp_path / "r", {"site.yml": "a: 1\n"})
        with pytest.raises(IngestError) as exc:
            scan_repo(repo, metadata_sidecar=repo / "nope.json")
        assert exc.value.kind == "io"

    def test_malformed_sidecar_warns(self, tmp_path):
        repo = make_repo(tmp_path / "r", {"site.yml": "a: 1\n"})
        (repo / "galaxy_meta.json").write_text("{not json", encoding="utf-8")
        snap = scan_repo(repo)
        assert snap.metadata is None
        assert any("metadata unreadable" in w for w in snap.warnings)


class TestGalaxyMetadata:
    def test_full_record(self):
        meta = parse_galaxy_metadata(sidecar_record())
        assert meta.completeness == ()
        assert meta.download_count == 120
        assert meta.version_release_times[0] == datetime(2021, 1, 10, tzinfo=timezone.utc)

    def test_avg_update_time_is_mean_gap(self):
        meta = parse_galaxy_metadata(
            sidecar_record(
                version_release_times=[
                    "2021-01-01T00:00:00Z",
                    "2021-01-11T00:00:00Z",
                    "2021-01-31T00:00:00Z",
                ]
            )
        )
        assert meta.avg_update_time_days == pytest.approx((10 + 20) / 2)

    def test_avg_update_time_zero_below_two_releases(self):
        meta = parse_galaxy_metadata(sidecar_record(version_release_times=["2021-01-01T00:00:00Z"]))
        assert meta.avg_update_time_days == 0.0

    def test_release_times_sorted(self):
        meta = parse_galaxy_metadata(
            sidecar_record(
                version_release_times=["2022-05-01T00:00:00Z", "2020-01-01T00:00:00Z"]
            )
        )
        assert meta.version_release_times == tuple(sorted(meta.version_release_times))

    def test_reference_time_latest_release_with_fallback(self):
        meta = parse_galaxy_metadata(sidecar_record())
        assert meta.reference_time("latest_release") == meta.version_release_times[-1]
        no_releases = parse_galaxy_metadata(sidecar_record(version_release_times=[]))
        assert no_releases.reference_time("latest_release") == no_releases.observed_at
        assert meta.reference_time("observed_at") == meta.observed_at

    def test_missing_fields_flagged_not_fabricated(self):
        record = sidecar_record()
        del record["stars"]
        meta = parse_galaxy_metadata(record)
        assert meta.stars == 0
        assert "stars missing" in meta.completeness


class TestFetchRegistryMetadata:
    def test_file_endpoint_passthrough_equivalence(self, tmp_path):
        record = sidecar_record()
        fixture = tmp_path / "meta.json"
        fixture.write_text(json.dumps(record), encoding="utf-8")
        fetched = fetch_registry_metadata("any.role", fixture.as_uri())
        assert fetched == parse_galaxy_metadata(record)

    def test_galaxy_v1_payload_mapping(self, tmp_path):
        payload = {
            "results": [
                {
                    "download_count": 9000,
                    "stargazers_count": 12,
                    "forks_count": 3,
                    "open_issues_count": 1,
                    "min_ansible_version": "2.10",
                    "modified": "2022-02-02T00:00:00Z",
                    "summary_fields": {
                        "tags": ["web", "nginx"],
                        "dependencies": [],
                        "platforms": [{"name": "Debian"}, {"name": "Ubuntu"}],
                        "versions": [
                            {"release_date": "2021-01-01T00:00:00Z"},
                            {"release_date": "2022-01-01T00:00:00Z"},
                        ],
                    },
                }
            ]
        }
        fixture = tmp_path / "role.json"
        fixture.write_text(json.dumps(payload), encoding="utf-8")
        meta = fetch_registry_metadata("acme.nginx", fixture.as_uri())
        assert meta.download_count == 9000
        assert meta.stars == 12
        assert meta.tag_count == 2
        assert meta.supported_platform_count == 2
        assert meta.total_versions == 2
        assert meta.version_release_times[-1] == datetime(2022, 1, 1, tzinfo=timezone.utc)
        assert meta.observed_at == datetime(2022, 2, 2, tzinfo=timezone.utc)

    def test_missing_stars_flagged(self, tmp_path):
        fixture = tmp_path / "role.json"
        fixture.write_text(json.dumps({"results": [{"download_count": 5}]}), encoding="utf-8")
        meta = fetch_registry_metadata("acme.nginx", fixture.as_uri())
        assert meta.stars == 0
        assert "stars missing" in meta.completeness

    def test_http_error_carries_retry_hint(self, monkeypatch):
        def raise_404(url, timeout):
            raise urllib.error.HTTPError(
                url, 404, "not found", {"Retry-After": "30"}, io.BytesIO(b"")
            )

        monkeypatch.setattr(urllib.request, "urlopen", raise_404)
        with pytest.raises(IngestError) as exc:
            fetch_registry_metadata("acme.nginx", "https://registry.example/api")
        assert exc.value.kind == "registry"
        assert "retry after 30" in str(exc.value)

    def test_unreachable_endpoint(self, tmp_path):
        with pytest.raises(IngestError) as exc:
            fetch_registry_metadata("x", (tmp_path / "missing.json").as_uri())
        assert exc.value.kind == "registry"

    def test_empty_results_is_an_error(self, tmp_path):
        fixture = tmp_path / "role.json"
        fixture.write_text(json.dumps({"results": []}), encoding="utf-8")
        with pytest.raises(IngestError) as exc:
            fetch_registry_metadata("ghost.role", fixture.as_uri())
        assert exc.value.kind == "registry"
