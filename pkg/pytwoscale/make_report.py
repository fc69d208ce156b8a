import os

import jinja2

curr_dir = os.path.dirname(__file__)
default_template = os.path.join(curr_dir, 'report_template.txt')


def load_template(input_path='default'):
    """
    Returns a jinja2 template from file.

    Parameters
    ----------
    input_path : string
        Path to a jinja2 template, or ``default`` for the report template
        shipped with pytwoscale.

    Returns
    -------
    output_template : jinja2 Template
    """
    if input_path == 'default':
        input_path = default_template
    with open(input_path, 'r', encoding='utf-8') as template:
        output_template = jinja2.Template(template.read(),
                                          trim_blocks=True,
                                          lstrip_blocks=True)
    return output_template


def render_report(variable_dict, output_path, input_path='default'):
    """
    Writes the plain text run report.

    Parameters
    ----------
    variable_dict : dictionary
        Values for the fields of the template: ``command``, ``version``,
        ``settings``, ``summary``, ``files`` and optionally ``tables``
        (a dictionary of name to pandas DataFrame).
    output_path : string
        Path of the report file.
    input_path : string
        Template path, default is the shipped template.

    Returns
    -------
    output_path : string
    """
    template = load_template(input_path)
    tables = {name: df.to_string(index=False)
              for name, df in variable_dict.get('tables', {}).items()}
    report = template.render(dict(variable_dict, tables=tables))
    with open(output_path, 'wb') as outfile:
        outfile.write(report.encode('utf-8'))
    return output_path
