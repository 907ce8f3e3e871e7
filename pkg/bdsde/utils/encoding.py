import six

text_type = six.text_type
string_types = six.string_types
binary_type = six.binary_type


def safe_decode(value, encoding='utf-8', errors='strict'):
    if isinstance(value, text_type):
        return value

    if isinstance(value, (bytearray, binary_type)):
        return bytes(value).decode(encoding, errors)
    else:
        return text_type(value)


def safe_encode(value, encoding='utf-8', errors='strict'):
    if isinstance(value, binary_type):
        return value
    return safe_decode(value, encoding, errors).encode(encoding, errors)


def read_text(path, encoding='utf-8'):
    """Read a config file as text, dropping a UTF-8 byte order mark if present."""
    with open(path, 'rb') as f:
        raw = f.read()
    if raw.startswith(b'\xef\xbb\xbf'):
        raw = raw[3:]
    return safe_decode(raw, encoding)


def write_text(path, text, encoding='utf-8'):
    with open(path, 'wb') as f:
        f.write(safe_encode(text, encoding))
