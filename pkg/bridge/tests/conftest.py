import pytest

from entre_bridge.fixture import build_ner_fixture, build_relation_fixture


@pytest.fixture(scope="session")
def ner_model_dir(tmp_path_factory) -> str:
    return str(build_ner_fixture(tmp_path_factory.mktemp("models") / "tiny-ner"))


@pytest.fixture(scope="session")
def relation_model_dir(tmp_path_factory) -> str:
    return str(
        build_relation_fixture(tmp_path_factory.mktemp("models") / "tiny-relation")
    )
