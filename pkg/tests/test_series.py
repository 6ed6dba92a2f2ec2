import unittest
from datetime import date

from models.errors import PoolShapeError, SeriesValidationError
from models.series import DAILY, MONTHLY, SamplePool, TermQuery, TimeGrid
from tests.fixtures import START, make_pool, make_series


class TestTimeGrid(unittest.TestCase):

    def test_from_window_monthly(self):
        """Test a monthly window covers both ends inclusively"""
        grid = TimeGrid.from_window(date(2010, 11, 1), date(2011, 2, 1))
        self.assertEqual(grid.frequency, MONTHLY)
        self.assertEqual(grid.periods, (date(2010, 11, 1), date(2010, 12, 1), date(2011, 1, 1), date(2011, 2, 1)))

    def test_from_window_daily(self):
        """Test a daily window crosses month ends without gaps"""
        grid = TimeGrid.from_window(date(2020, 2, 27), date(2020, 3, 2), DAILY)
        self.assertEqual(len(grid), 5)
        self.assertIn(date(2020, 2, 29), grid.periods)
        with self.assertRaises(SeriesValidationError):
            TimeGrid.from_window(date(2020, 1, 1), date(2020, 1, 5), "weekly")

    def test_query_grid_matches_window(self):
        """Test a query's grid spans exactly its window"""
        query = TermQuery(term="jobs", geo="US", start=START, end=date(2010, 12, 1))
        self.assertEqual(query.grid(), TimeGrid.monthly(START, 12))

    def test_slice(self):
        """Test slicing keeps the inclusive sub-range and the frequency"""
        grid = TimeGrid.monthly(START, 12)
        part = grid.slice(date(2010, 3, 1), date(2010, 5, 1))
        self.assertEqual(part.periods, grid.periods[2:5])
        self.assertEqual(part.frequency, MONTHLY)

    def test_slice_outside_grid(self):
        """Test slicing off the grid or down to one period raises"""
        grid = TimeGrid.monthly(START, 12)
        with self.assertRaises(SeriesValidationError):
            grid.slice(date(2009, 12, 1), date(2010, 5, 1))
        with self.assertRaises(SeriesValidationError):
            grid.slice(date(2010, 3, 1), date(2010, 3, 1))


class TestSamplePool(unittest.TestCase):

    def test_duplicate_query_rejected(self):
        """Test a pool cannot list the same term twice"""
        row = [make_series([1, 2, 3], term="jobs"), make_series([3, 2, 1], term="jobs")]
        with self.assertRaises(PoolShapeError) as ctx:
            SamplePool([series.query for series in row], [row])
        self.assertIn("jobs", str(ctx.exception))

    def test_term_matrix(self):
        """Test one term's values stack into a samples x periods matrix"""
        pool = make_pool([[[1, 2, 3], [9, 9, 8]], [[4, 5, 6], [7, 7, 7]]])
        self.assertEqual(pool.term_matrix(0).tolist(), [[1, 2, 3], [4, 5, 6]])
        self.assertEqual(pool.term_matrix(1).shape, (2, 3))


if __name__ == '__main__':
    unittest.main()
