"""Small built-in corpora: UML examples, a gradient-check instance, a toy project."""

from __future__ import annotations

import json
from pathlib import Path

VEHICLE_SOURCES = {
    "Vehicle.java": "public interface Vehicle {\n    void drive();\n}\n",
    "Car.java": "public class Car implements Vehicle {\n    public void drive() { }\n}\n",
    "BMW.java": (
        "public class BMW extends Car {\n"
        "    private Type type;\n"
        "    private Engine engine;\n"
        "    private Body body;\n"
        "}\n"
    ),
    "Type.java": "public class Type { }\n",
    "Engine.java": "public class Engine { }\n",
    "Body.java": "public class Body { }\n",
    "Person.java": (
        "public class Person {\n"
        "    public void trip(BMW car) {\n"
        "        car.drive();\n"
        "    }\n"
        "}\n"
    ),
}

RESOURCE_HANDLE_METHOD = """\
public PropertyStatus getProperty(QualifiedName propertyName) throws DAVException {
    Collection names = new HashSet();
    names.add(propertyName);
    URLTable result = getProperties(names, IContext.DEPTH_ZERO);
    URL url = null;
    try {
        url = new URL(locator.getResourceURL());
    } catch (MalformedURLException e) {
        throw new SystemException(e);
    }
    Hashtable propTable = (Hashtable) result.get(url);
    if (propTable == null)
        throw new DAVException(Policy.bind("exception.lookup", url.toExternalForm()));
    return (PropertyStatus) propTable.get(propertyName);
}
"""

RESOURCE_SOURCES = {
    "AbstractResourceHandle.java": (
        "package org.eclipse.webdav.client;\n\n"
        "public abstract class AbstractResourceHandle {\n"
        "    protected ResourceLocator locator;\n\n"
        + "".join("    " + line + "\n" for line in RESOURCE_HANDLE_METHOD.splitlines())
        + "}\n"
    ),
    "PropertyStatus.java": "public class PropertyStatus {\n    private int statusCode;\n}\n",
    "ResourceLocator.java": "public class ResourceLocator {\n    public String getResourceURL() { return null; }\n}\n",
}


def write_sources(sources: dict[str, str], directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in sources.items():
        (directory / name).write_text(text, encoding="utf-8")
    return directory


# (class, method source, first-sentence summary)
TOY_METHODS = [
    ("Account", "public double getBalance() { return balance; }",
     "Returns the current account balance."),
    ("Account", "public void deposit(double amount) { balance = balance + amount; }",
     "Adds money to the account."),
    ("Account", "public void withdraw(double amount) { balance = balance - amount; }",
     "Removes money from the account."),
    ("Account", "public Customer getOwner() { return owner; }",
     "Returns the owner of this account."),
    ("Account", "public boolean isOverdrawn() { return balance < 0; }",
     "Checks whether the balance is negative."),
    ("Customer", "public String getName() { return name; }",
     "Gets the name of the customer."),
    ("Customer", "public void setName(String name) { this.name = name; }",
     "Sets the customer name."),
    ("Customer", "public Address getAddress() { return address; }",
     "Returns the postal address of the customer."),
    ("Customer", "public void addAccount(Account account) { accounts.add(account); }",
     "Registers a new account for this customer."),
    ("Customer", "public int countAccounts() { return accounts.size(); }",
     "Counts the accounts held by the customer."),
    ("Address", "public String getCity() { return city; }",
     "Returns the city of the address."),
    ("Address", "public String getStreet() { return street; }",
     "Returns the street line of the address."),
    ("Address", "public String format() { return street + \", \" + city; }",
     "Formats the address as a single line."),
    ("Bank", "public Account open(Customer customer) { Account a = new Account(customer); customer.addAccount(a); return a; }",
     "Opens an account for the given customer."),
    ("Bank", "public void close(Account account) { ledger.remove(account); }",
     "Closes the given account and drops it."),
    ("Bank", "public double totalDeposits() { double sum = 0; for (Account a : ledger) { sum = sum + a.getBalance(); } return sum; }",
     "Sums the balances of all accounts."),
    ("Bank", "public Ledger getLedger() { return ledger; }",
     "Returns the ledger kept by the bank."),
    ("Ledger", "public void remove(Account account) { entries.remove(account); }",
     "Deletes an account entry from the ledger."),
    ("Ledger", "public int size() { return entries.size(); }",
     "Returns the number of ledger entries."),
    ("SavingsAccount", "public double interest() { return getBalance() * 0.02; }",
     "Computes the yearly interest on savings."),
]

TOY_CLASS_HEADERS = {
    "Account": "public class Account {\n    private double balance;\n    private Customer owner;\n",
    "Customer": "public class Customer {\n    private String name;\n    private Address address;\n    private java.util.List<Account> accounts;\n",
    "Address": "public class Address {\n    private String city;\n    private String street;\n",
    "Bank": "public class Bank implements Institution {\n    private Ledger ledger;\n",
    "Ledger": "public class Ledger {\n    private java.util.List<Account> entries;\n",
    "SavingsAccount": "public class SavingsAccount extends Account {\n",
}
TOY_EXTRA_SOURCES = {
    "Institution.java": "public interface Institution {\n    Ledger getLedger();\n}\n",
}
TOY_GRAPH_ID = "toybank"


def toy_project_sources() -> dict[str, str]:
    bodies: dict[str, list[str]] = {name: [] for name in TOY_CLASS_HEADERS}
    for cls, code, _ in TOY_METHODS:
        bodies[cls].append("    " + code)
    sources = {
        f"{cls}.java": TOY_CLASS_HEADERS[cls] + "\n".join(bodies[cls]) + "\n}\n"
        for cls in TOY_CLASS_HEADERS
    }
    sources.update(TOY_EXTRA_SOURCES)
    return sources


def toy_raw_records(graph_id: str = TOY_GRAPH_ID) -> list[dict]:
    return [
        {
            "id": f"toy-{i:02d}",
            "repo": graph_id,
            "class_name": cls,
            "code": code,
            "summary": summary,
            "uml_graph_id": graph_id,
        }
        for i, (cls, code, summary) in enumerate(TOY_METHODS)
    ]


def write_toy_corpus(directory: str | Path) -> tuple[Path, Path]:
    """Write the toy project sources and raw dataset; returns (project dir, dataset)."""
    directory = Path(directory)
    project = write_sources(toy_project_sources(), directory / TOY_GRAPH_ID)
    dataset = directory / "raw.jsonl"
    with open(dataset, "w", encoding="utf-8") as fh:
        for rec in toy_raw_records():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return project, dataset


# Several graph-path gradients on the tiny instance are around 1e-9. Central
# differences carry roughly 1e-16 * |loss| / eps of roundoff, which at
# eps=1e-5 is already a few percent of such a gradient; 1e-3 keeps both the
# roundoff and the O(eps^2) truncation well below the 1e-4 tolerance.
GRADCHECK_EPS = 1e-3


def tiny_gradcheck_case(precision: str = "double", seed: int = 0):
    """A model and batch small enough for a full finite-difference sweep.

    5 code tokens, an 8-token SBT sequence, and a 4-class graph with one edge
    of every relation type.
    """
    from .model import CoCoSum, Config, make_batch
    from .pipeline import build_vocabs
    from .preprocess import SummarizationInstance
    from .sbt import AstNode, sbt_flatten
    from .uml import Relation, UmlGraph

    graph = UmlGraph(
        names=["Reader", "Source", "Stream", "Cache"],
        name_tokens=[["reader"], ["source"], ["stream"], ["cache"]],
        edges=[
            (0, 1, Relation.REALIZATION),
            (1, 2, Relation.GENERALIZATION),
            (0, 2, Relation.ASSOCIATION),
            (3, 0, Relation.DEPENDENCY),
        ],
    )
    inst = SummarizationInstance(
        id="tiny",
        code_tokens=["return", "stream", ".", "read", ";"],
        sbt_tokens=sbt_flatten(AstNode("return", [AstNode("call")])),
        class_name_tokens=["reader"],
        summary_tokens=["reads", "the", "stream"],
        uml_graph_id="tiny",
        enclosing_class_node_id=0,
    )
    graphs = {"tiny": graph}
    vocabs = build_vocabs([inst], graphs)
    cfg = Config(
        code_vocab=len(vocabs.code),
        sbt_vocab=len(vocabs.sbt),
        summary_vocab=len(vocabs.summary),
        embed_dim=3,
        hidden_dim=4,
        class_dim=4,
        gnn_dim=3,
        dropout=0.0,
        precision=precision,
    )
    model = CoCoSum(cfg, seed=seed)
    batch = make_batch([inst], graphs, vocabs, cfg)
    return model, batch
