import logging

import numpy as np
import pytest

from cocosum.fixtures import VEHICLE_SOURCES, RESOURCE_SOURCES, write_sources
from cocosum.uml import (
    RELATIONS,
    Relation,
    UmlGraph,
    extract_project,
    extract_relations,
    parse_relation,
    scan_project,
    scan_source,
    subgraph_for_method,
)

VEHICLE_EDGES = {
    ("Car", "Vehicle", "REALIZATION"),
    ("BMW", "Car", "GENERALIZATION"),
    ("BMW", "Type", "ASSOCIATION"),
    ("BMW", "Engine", "ASSOCIATION"),
    ("BMW", "Body", "ASSOCIATION"),
    ("Person", "BMW", "DEPENDENCY"),
}


@pytest.fixture
def vehicles(tmp_path):
    return extract_project(write_sources(VEHICLE_SOURCES, tmp_path / "vehicles"))


def test_scan_source_car():
    (rec,) = scan_source("class Car implements Vehicle { Engine e; }")
    assert rec.name == "Car" and rec.implements == ["Vehicle"] and rec.fields == ["Engine"]


def test_scan_empty():
    assert scan_source("") == []


def test_duplicate_class_first_wins(tmp_path, caplog):
    (tmp_path / "a.java").write_text("class Dup { A x; }\nclass A {}\n")
    (tmp_path / "b.java").write_text("class Dup { B y; }\nclass B {}\n")
    with caplog.at_level(logging.WARNING):
        index = scan_project(sorted(tmp_path.glob("*.java")))
    assert index["Dup"].fields == ["A"]
    assert any("duplicate" in r.message for r in caplog.records)


def test_vehicle_edges(vehicles):
    assert len(vehicles) == 7
    assert vehicles.edge_set() == VEHICLE_EDGES


def test_resource_handle_dependency(tmp_path):
    g = extract_project(write_sources(RESOURCE_SOURCES, tmp_path / "resource"))
    assert ("AbstractResourceHandle", "PropertyStatus", "DEPENDENCY") in g.edge_set()
    assert ("AbstractResourceHandle", "ResourceLocator", "ASSOCIATION") in g.edge_set()


def test_isolated_class(tmp_path):
    (tmp_path / "Lone.java").write_text("public class Lone { int x; void f(String s) {} }")
    g = extract_project(tmp_path)
    assert len(g) == 1 and g.edges == []


def test_field_use_dominates_dependency(tmp_path):
    src = {
        "A.java": "class A { B b; B make(B other) { B local = other; return local; } C c() { return null; } }",
        "B.java": "class B {}",
        "C.java": "class C {}",
    }
    g = extract_project(write_sources(src, tmp_path))
    assert g.edge_set() == {("A", "B", "ASSOCIATION"), ("A", "C", "DEPENDENCY")}


def test_local_and_new_types_are_dependencies(tmp_path):
    src = {
        "A.java": "class A { void run() { Helper h = new Helper(); Other.go(new Thing()); } }",
        "Helper.java": "class Helper {}",
        "Thing.java": "class Thing {}",
    }
    g = extract_project(write_sources(src, tmp_path))
    assert g.edge_set() == {("A", "Helper", "DEPENDENCY"), ("A", "Thing", "DEPENDENCY")}


def test_no_assoc_and_dep_on_same_pair_random(tmp_path):
    rng = np.random.default_rng(0)
    names = [f"K{i}" for i in range(6)]
    for trial in range(20):
        d = tmp_path / f"p{trial}"
        src = {}
        for nm in names:
            fields = " ".join(f"{t} f{k};" for k, t in enumerate(rng.choice(names, 2)))
            params = ", ".join(f"{t} p{k}" for k, t in enumerate(rng.choice(names, 2)))
            src[f"{nm}.java"] = f"class {nm} {{ {fields} void m({params}) {{}} }}"
        g = extract_project(write_sources(src, d))
        pairs = {}
        for s, t, r in g.edges:
            pairs.setdefault((s, t), set()).add(r)
        assert not any({Relation.ASSOCIATION, Relation.DEPENDENCY} <= rs for rs in pairs.values())
        assert all(s != t for s, t, _ in g.edges)


def test_subgraph_radius(vehicles):
    bmw = vehicles.node_by_name("BMW")
    one = subgraph_for_method(vehicles, bmw, 1)
    assert set(one.names) == {"BMW", "Car", "Type", "Engine", "Body", "Person"}
    assert subgraph_for_method(vehicles, bmw, 0).names == ["BMW"]
    assert set(subgraph_for_method(vehicles, bmw, 10).names) == set(vehicles.names)
    sizes = [len(subgraph_for_method(vehicles, vehicles.node_by_name("Type"), r)) for r in range(5)]
    assert sizes == sorted(sizes)
    with pytest.raises(KeyError):
        subgraph_for_method(vehicles, 99, 1)


def test_graph_json_round_trip(vehicles, tmp_path):
    vehicles.save(tmp_path / "g.json")
    back = UmlGraph.load(tmp_path / "g.json")
    assert back.edges == vehicles.edges and back.names == vehicles.names and back.ids == vehicles.ids
    assert all(r in RELATIONS for _, _, r in back.edges)


def test_relation_aliases():
    assert parse_relation("DEPEND") is Relation.DEPENDENCY
    assert parse_relation("implements") is Relation.REALIZATION
    with pytest.raises(ValueError):
        parse_relation("COMPOSES")


def test_extract_is_deterministic(tmp_path):
    d = write_sources(VEHICLE_SOURCES, tmp_path / "f")
    a, b = extract_project(d), extract_project(d)
    a.save(tmp_path / "a.json")
    b.save(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_extract_relations_only_index_classes():
    index = {r.name: r for r in scan_source("class A extends Object implements Runnable { String s; }")}
    assert extract_relations(index).edges == []
