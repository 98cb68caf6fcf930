import pytest

from bkfourier.algebra import make_chars, make_field


@pytest.fixture
def f2():
    return make_field(2)


@pytest.fixture
def f3():
    return make_field(3)


@pytest.fixture
def f4():
    return make_field(2, 2)


@pytest.fixture
def f5():
    return make_field(5)


@pytest.fixture
def f9():
    return make_field(3, 2)


@pytest.fixture
def chars3(f3):
    return make_chars(f3)


@pytest.fixture
def chars5(f5):
    return make_chars(f5)
