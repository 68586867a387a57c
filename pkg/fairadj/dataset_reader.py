'''Read prediction triples from CSV into memory
'''
import csv
from pathlib import Path

from .exceptions import IngestionError


class PredictionReader:
    def __init__(self, data_path):
        data_path = Path(data_path)
        if not data_path.is_file():
            raise IngestionError(
                'Invalid file path provided: {}'.format(data_path)
            )
        self.data_path = data_path

    def read_rows(self, columns):
        '''Read the requested columns as strings, preserving row order

        columns: iterable of column names that must be in the header
        '''
        columns = list(columns)
        with open(self.data_path, 'r', encoding='utf-8', newline='') as ifile:
            reader = csv.DictReader(ifile)
            header = reader.fieldnames
            if not header:
                raise IngestionError(
                    'Empty file: {}'.format(self.data_path)
                )
            missing = [name for name in columns if name not in header]
            if missing:
                raise IngestionError('Missing column(s) {} in {}'.format(
                    ', '.join(missing), self.data_path
                ))
            rows = {name: [] for name in columns}
            for line_no, row in enumerate(reader, start=2):
                for name in columns:
                    value = row[name]
                    if value is None or value.strip() == '':
                        raise IngestionError(
                            'Missing value for {} on line {}'.format(
                                name, line_no
                            )
                        )
                    rows[name].append(value.strip())
        if not rows[columns[0]]:
            raise IngestionError('Empty file: {}'.format(self.data_path))
        return rows
