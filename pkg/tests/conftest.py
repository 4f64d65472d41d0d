import numpy as np
import pytest

from socdiff.harness import synth_generate
from socdiff.networks import build_bipartite, build_social, combine


@pytest.fixture
def small_bip():
    # two users, three items: u0 -> {o0, o1}, u1 -> {o1, o2}
    return build_bipartite([(0, 0), (0, 1), (1, 1), (1, 2)], 2, 3)


@pytest.fixture
def small_net(small_bip):
    return combine(small_bip, build_social([], 2))


@pytest.fixture
def small_social_net(small_bip):
    return combine(small_bip, build_social([(0, 1)], 2))


@pytest.fixture
def friends_net():
    # u0 -> {o0}, u1 -> {o1}, o2 collected by nobody; u0 and u1 are friends,
    # so o1 is reachable from u0 only through the social link
    bip = build_bipartite([(0, 0), (1, 1)], 2, 3)
    return combine(bip, build_social([(0, 1)], 2))


def materialize(cnet, items_path, social_path):
    items_path.write_text(
        "".join(f"u{u}\to{i}\n" for u, i in cnet.bipartite.edges.tolist()))
    social_path.write_text(
        "".join(f"u{a}\tu{b}\n" for a, b in cnet.social.edges.tolist()))


@pytest.fixture(scope="session")
def synth_net():
    """Small deterministic planted-partition network, shared read-only."""
    return synth_generate(2, 12, 12, 0.3, 0.05, 0.2, 0.02, 5)


@pytest.fixture(scope="session")
def synth_files(tmp_path_factory, synth_net):
    """The synth_net dataset written as TSV files."""
    root = tmp_path_factory.mktemp("synthdata")
    items, social = root / "items.tsv", root / "social.tsv"
    materialize(synth_net, items, social)
    return str(items), str(social)


@pytest.fixture
def run_cli(capsys):
    from socdiff.cli import main

    def run(*args):
        code = main([str(a) for a in args])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
