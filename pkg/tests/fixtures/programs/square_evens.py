def square_evens(xs):
    """Squares of the even entries, in order."""
    return [x * x for x in xs if x % 2 == 0]
